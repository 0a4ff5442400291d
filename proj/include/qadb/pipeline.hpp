#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qadb/io.hpp"
#include "qadb/sampler.hpp"

namespace qadb {

enum class Problem { join, tx, cloud };
enum class SamplerKind { sa, exhaustive };

inline Problem parse_problem(const std::string& s) {
  if (s == "join") return Problem::join;
  if (s == "tx") return Problem::tx;
  if (s == "cloud") return Problem::cloud;
  throw std::invalid_argument("unknown problem '" + s + "' (expected join, tx or cloud)");
}

inline std::string to_string(Problem p) {
  switch (p) {
    case Problem::join: return "join";
    case Problem::tx: return "tx";
    case Problem::cloud: return "cloud";
  }
  return "?";
}

inline SamplerKind parse_sampler(const std::string& s) {
  if (s == "sa") return SamplerKind::sa;
  if (s == "exhaustive") return SamplerKind::exhaustive;
  throw std::invalid_argument("unknown sampler '" + s + "' (expected sa or exhaustive)");
}

inline std::string to_string(SamplerKind s) { return s == SamplerKind::sa ? "sa" : "exhaustive"; }

struct PipelineOptions {
  Problem problem = Problem::join;
  SamplerKind sampler = SamplerKind::sa;
  AnnealParams anneal;
  std::optional<double> penalty;
  double carbon_weight = 1.0;
  std::optional<Index> slots;
  bool oracle = false;
};

struct PhaseTimings {
  double preprocess_ms = 0.0;
  double encode_ms = 0.0;
  double optimize_ms = 0.0;
  double readout_ms = 0.0;
};

/// Outcome of one pipeline run. `objective` is the decoded solution's
/// domain objective (join: log cost; tx: violations * (1 + n(S-1)) + slot
/// sum; cloud: carbon, unset when infeasible).
struct RunReport {
  Problem problem = Problem::join;
  std::string instance;
  std::string sampler;
  std::uint64_t seed = 0;
  Index num_variables = 0;
  std::optional<double> best_energy;
  io::ordered_json solution;
  std::optional<double> objective;
  bool repaired = false;
  bool oracle_run = false;
  io::ordered_json oracle_solution;
  std::optional<double> oracle_objective;
  PhaseTimings timings;

  /// Decoded and oracle objectives agree (both infeasible counts as agreement).
  std::optional<bool> optimal_hit() const {
    if (!oracle_run) return std::nullopt;
    if (!objective || !oracle_objective) return !objective && !oracle_objective;
    const double tol = problem == Problem::join ? 1e-6 : 1e-9;
    return std::abs(*objective - *oracle_objective) <= tol * std::max(1.0, std::abs(*oracle_objective));
  }
};

inline io::ordered_json to_json(const RunReport& r, bool include_timings = true) {
  io::ordered_json out;
  out["problem"] = to_string(r.problem);
  out["instance"] = r.instance;
  out["sampler"] = r.sampler;
  out["seed"] = r.seed;
  out["num_variables"] = r.num_variables;
  if (r.best_energy) out["best_energy"] = *r.best_energy;
  out["solution"] = r.solution;
  if (r.objective) out["objective"] = *r.objective; else out["objective"] = nullptr;
  if (r.oracle_run) {
    out["oracle"] = r.oracle_solution;
    if (r.oracle_objective) out["oracle_objective"] = *r.oracle_objective;
    else out["oracle_objective"] = nullptr;
    out["optimal_hit"] = *r.optimal_hit();
  }
  if (include_timings) {
    out["timings_ms"] = {{"preprocess", r.timings.preprocess_ms},
                         {"encode", r.timings.encode_ms},
                         {"optimize", r.timings.optimize_ms},
                         {"readout", r.timings.readout_ms}};
  }
  return out;
}

namespace detail {

class Stopwatch {
 public:
  double lap_ms() {
    const auto now = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(now - last_).count();
    last_ = now;
    return ms;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

inline std::unique_ptr<Sampler> make_sampler(const PipelineOptions& o) {
  if (o.sampler == SamplerKind::exhaustive) return std::make_unique<ExhaustiveSampler>(1);
  return std::make_unique<AnnealingSampler>(o.anneal);
}

inline double tx_objective(const tx::Schedule& s, Index n, Index slots) {
  return static_cast<double>(s.violations) * tx::auto_penalty(n, slots) +
         static_cast<double>(s.slot_sum());
}

inline Index tx_slots(const PipelineOptions& o, const tx::ConflictGraph& g) {
  const Index s = o.slots ? *o.slots : std::max<Index>(1, tx::greedy_slot_bound(g));
  if (s == 0) throw std::invalid_argument("slot count must be at least 1");
  return s;
}

inline void run_join(const io::json& doc, const PipelineOptions& o, RunReport& r) {
  Stopwatch sw;
  const join::Query q = io::query_from_json(doc);
  join::log_coefficients(q);
  r.timings.preprocess_ms = sw.lap_ms();
  auto enc = join::encode_join_order(q, o.penalty);
  r.num_variables = enc.model.num_variables();
  r.timings.encode_ms = sw.lap_ms();
  const SampleSet samples = make_sampler(o)->sample(enc.model);
  r.timings.optimize_ms = sw.lap_ms();
  const auto order = join::decode_join_order(enc.varmap, samples.best());
  r.best_energy = samples.best().energy;
  r.solution = io::to_json(q, order);
  r.objective = join::log_cost(q, order);
  r.repaired = order.repaired;
  r.timings.readout_ms = sw.lap_ms();
  if (o.oracle && q.size() <= join::kMaxOracleRelations) {
    const auto best = join::oracle_best_order(q);
    r.oracle_run = true;
    r.oracle_solution = io::to_json(q, best);
    r.oracle_objective = join::log_cost(q, best);
  }
}

inline void run_tx(const io::json& doc, const PipelineOptions& o, RunReport& r) {
  Stopwatch sw;
  const tx::Workload w = io::workload_from_json(doc);
  const tx::ConflictGraph g = tx::conflicts(w);
  const Index slots = tx_slots(o, g);
  r.timings.preprocess_ms = sw.lap_ms();
  auto enc = tx::encode_schedule(g, slots, o.penalty);
  r.num_variables = enc.model.num_variables();
  r.timings.encode_ms = sw.lap_ms();
  tx::Schedule s;
  if (enc.model.num_variables() == 0) {
    r.timings.optimize_ms = sw.lap_ms();
    s = tx::make_schedule(g, {}, false);
    r.best_energy = enc.model.offset();
  } else {
    const SampleSet samples = make_sampler(o)->sample(enc.model);
    r.timings.optimize_ms = sw.lap_ms();
    s = tx::decode_schedule(enc.varmap, samples.best(), g);
    r.best_energy = samples.best().energy;
  }
  r.solution = io::to_json(w, s);
  r.solution["slot_count"] = slots;
  r.objective = tx_objective(s, g.size(), slots);
  r.repaired = s.repaired;
  r.timings.readout_ms = sw.lap_ms();
  if (o.oracle && g.size() <= tx::kMaxOracleTransactions) {
    try {
      const auto best = tx::oracle_schedule(g, slots);
      r.oracle_run = true;
      r.oracle_solution = io::to_json(w, best);
      r.oracle_objective = tx_objective(best, g.size(), slots);
    } catch (const std::invalid_argument&) {
      // enumeration guard: oracle not computable
    }
  }
}

inline io::ordered_json oracle_json(const cloud::CloudInstance& c, const cloud::OracleResult& res) {
  if (!res.feasible) return io::ordered_json{{"feasible", false}, {"report", "instance is infeasible"}};
  return io::to_json(c, res.allocation);
}

inline void run_cloud(const io::json& doc, const PipelineOptions& o, RunReport& r) {
  Stopwatch sw;
  const cloud::CloudInstance c = io::cloud_from_json(doc);
  cloud::validate(c);
  r.timings.preprocess_ms = sw.lap_ms();
  auto enc = cloud::encode_allocation(c, o.penalty, o.carbon_weight);
  r.num_variables = enc.model.num_variables();
  r.timings.encode_ms = sw.lap_ms();
  cloud::Allocation a;
  if (enc.model.num_variables() == 0) {
    r.timings.optimize_ms = sw.lap_ms();
    a = cloud::decode_allocation(enc.varmap, Assignment{}, c);
    r.best_energy = enc.model.offset();
  } else {
    const SampleSet samples = make_sampler(o)->sample(enc.model);
    r.timings.optimize_ms = sw.lap_ms();
    a = cloud::decode_allocation(enc.varmap, samples.best(), c);
    r.best_energy = samples.best().energy;
  }
  const auto m = cloud::allocation_metrics(c, a);
  r.solution = io::to_json(c, a);
  if (m.feasible) r.objective = m.carbon;
  r.repaired = false;
  r.timings.readout_ms = sw.lap_ms();
  if (o.oracle) {
    try {
      const auto res = cloud::oracle_best_allocation(c);
      r.oracle_run = true;
      r.oracle_solution = oracle_json(c, res);
      if (res.feasible) r.oracle_objective = res.carbon;
    } catch (const std::invalid_argument&) {
      // enumeration guard: oracle not computable
    }
  }
}

}  // namespace detail

/// Preprocess, encode, optimise and read out one instance document.
inline RunReport run_pipeline(const io::json& doc, const std::string& instance_name,
                              const PipelineOptions& o) {
  RunReport r;
  r.problem = o.problem;
  r.instance = instance_name;
  r.sampler = to_string(o.sampler);
  r.seed = o.anneal.seed;
  switch (o.problem) {
    case Problem::join: detail::run_join(doc, o, r); break;
    case Problem::tx: detail::run_tx(doc, o, r); break;
    case Problem::cloud: detail::run_cloud(doc, o, r); break;
  }
  return r;
}

inline RunReport run_pipeline(const std::string& path, const PipelineOptions& o) {
  return run_pipeline(io::parse_json(io::read_file(path)), path, o);
}

/// Brute-force ground truth only; the optimise phase times the oracle.
inline RunReport run_oracle(const io::json& doc, const std::string& instance_name,
                            const PipelineOptions& o) {
  RunReport r;
  r.problem = o.problem;
  r.instance = instance_name;
  r.sampler = "oracle";
  r.seed = o.anneal.seed;
  detail::Stopwatch sw;
  switch (o.problem) {
    case Problem::join: {
      const auto q = io::query_from_json(doc);
      join::log_coefficients(q);
      r.timings.preprocess_ms = sw.lap_ms();
      r.timings.encode_ms = sw.lap_ms();
      const auto best = join::oracle_best_order(q);
      r.timings.optimize_ms = sw.lap_ms();
      r.solution = io::to_json(q, best);
      r.objective = join::log_cost(q, best);
      break;
    }
    case Problem::tx: {
      const auto w = io::workload_from_json(doc);
      const auto g = tx::conflicts(w);
      const Index slots = detail::tx_slots(o, g);
      r.timings.preprocess_ms = sw.lap_ms();
      r.timings.encode_ms = sw.lap_ms();
      const auto best = tx::oracle_schedule(g, slots);
      r.timings.optimize_ms = sw.lap_ms();
      r.solution = io::to_json(w, best);
      r.solution["slot_count"] = slots;
      r.objective = detail::tx_objective(best, g.size(), slots);
      break;
    }
    case Problem::cloud: {
      const auto c = io::cloud_from_json(doc);
      r.timings.preprocess_ms = sw.lap_ms();
      r.timings.encode_ms = sw.lap_ms();
      const auto res = cloud::oracle_best_allocation(c);
      r.timings.optimize_ms = sw.lap_ms();
      r.solution = detail::oracle_json(c, res);
      if (res.feasible) r.objective = res.carbon;
      break;
    }
  }
  r.timings.readout_ms = sw.lap_ms();
  return r;
}

inline RunReport run_oracle(const std::string& path, const PipelineOptions& o) {
  return run_oracle(io::parse_json(io::read_file(path)), path, o);
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline std::string csv_number(const std::optional<double>& v) {
  return v ? qadb::detail::format_double(*v) : std::string();
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

struct BenchOptions {
  std::size_t repetitions = 1;
  std::uint64_t seed = 0;
  bool timings = false;  // wall-clock columns make the table non-reproducible
};

/// Seed used for repetition `rep` of the instance file named `file`.
inline std::uint64_t bench_seed(std::uint64_t seed, const std::string& file, std::size_t rep) {
  return stream_seed(seed ^ detail::fnv1a(file), rep);
}

/// One CSV row per (instance, repetition) over every *.json file in `dir`,
/// visited in filename order. The oracle runs whenever its guard allows.
inline void bench(const std::string& dir, PipelineOptions o, const BenchOptions& b,
                  std::ostream& out) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw std::runtime_error("cannot read directory '" + dir + "'");
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path().filename().string());
    }
  }
  if (ec) throw std::runtime_error("cannot read directory '" + dir + "': " + ec.message());
  std::sort(files.begin(), files.end());

  out << "instance,repetition,seed,sampler,num_variables,best_energy,decoded_objective,"
         "oracle_objective,optimal_hit,repaired";
  if (b.timings) out << ",preprocess_ms,encode_ms,optimize_ms,readout_ms";
  out << "\n";

  o.oracle = true;
  for (const auto& file : files) {
    const io::json doc = io::parse_json(io::read_file((fs::path(dir) / file).string()));
    for (std::size_t rep = 0; rep < b.repetitions; ++rep) {
      o.anneal.seed = bench_seed(b.seed, file, rep);
      const RunReport r = run_pipeline(doc, file, o);
      const auto hit = r.optimal_hit();
      out << detail::csv_field(file) << ',' << rep << ',' << r.seed << ',' << r.sampler << ','
          << r.num_variables << ',' << detail::csv_number(r.best_energy) << ','
          << detail::csv_number(r.objective) << ',' << detail::csv_number(r.oracle_objective)
          << ',' << (hit ? (*hit ? "1" : "0") : "") << ',' << (r.repaired ? 1 : 0);
      if (b.timings) {
        out << ',' << qadb::detail::format_double(r.timings.preprocess_ms) << ','
            << qadb::detail::format_double(r.timings.encode_ms) << ','
            << qadb::detail::format_double(r.timings.optimize_ms) << ','
            << qadb::detail::format_double(r.timings.readout_ms);
      }
      out << "\n";
    }
  }
}

}  // namespace qadb
