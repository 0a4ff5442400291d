#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "qadb/qubo.hpp"

namespace qadb {

struct Sample {
  Assignment bits;
  double energy = 0.0;
  std::size_t occurrences = 1;
};

/// Samples merged by bitstring and ordered by (energy, bits).
class SampleSet {
 public:
  SampleSet() = default;

  SampleSet(Index model_n, std::vector<Sample> raw) : model_n_(model_n) {
    std::map<Assignment, Sample> merged;
    for (auto& s : raw) {
      if (s.bits.size() != model_n) {
        throw std::invalid_argument("sample length does not match model size");
      }
      if (s.occurrences == 0) throw std::invalid_argument("sample occurrences must be positive");
      auto it = merged.find(s.bits);
      if (it == merged.end()) {
        merged.emplace(s.bits, std::move(s));
      } else {
        it->second.occurrences += s.occurrences;
      }
    }
    samples_.reserve(merged.size());
    for (auto& kv : merged) samples_.push_back(std::move(kv.second));
    std::stable_sort(samples_.begin(), samples_.end(), [](const Sample& a, const Sample& b) {
      if (a.energy != b.energy) return a.energy < b.energy;
      return a.bits < b.bits;
    });
  }

  Index model_n() const { return model_n_; }
  const std::vector<Sample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const Sample& best() const {
    if (samples_.empty()) throw std::logic_error("empty sample set");
    return samples_.front();
  }
  std::size_t total_occurrences() const {
    std::size_t n = 0;
    for (const auto& s : samples_) n += s.occurrences;
    return n;
  }

  auto begin() const { return samples_.begin(); }
  auto end() const { return samples_.end(); }

 private:
  Index model_n_ = 0;
  std::vector<Sample> samples_;
};

inline std::string bits_to_string(const Assignment& bits) {
  std::string s(bits.size(), '0');
  for (Index i = 0; i < bits.size(); ++i) s[i] = bits[i] ? '1' : '0';
  return s;
}

inline Assignment bits_from_string(std::string_view s) {
  Assignment bits(s.size());
  for (Index i = 0; i < s.size(); ++i) {
    if (s[i] != '0' && s[i] != '1') {
      throw std::invalid_argument("bitstring may contain only '0' and '1'");
    }
    bits[i] = s[i] == '1';
  }
  return bits;
}

// Text format:
//   samples <model_n> <count>
//   <bitstring> <energy> <occurrences>
inline void write_sampleset(std::ostream& os, const SampleSet& set) {
  os << "samples " << set.model_n() << ' ' << set.size() << '\n';
  for (const auto& s : set) {
    os << bits_to_string(s.bits) << ' ' << detail::format_double(s.energy) << ' '
       << s.occurrences << '\n';
  }
}

inline SampleSet read_sampleset(std::istream& is) {
  std::string line;
  auto fields = [](const std::string& l) {
    std::vector<std::string> out;
    std::istringstream ss(l);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
  };
  if (!std::getline(is, line)) throw std::invalid_argument("missing sample set header");
  const auto header = fields(line);
  if (header.size() != 3 || header[0] != "samples") {
    throw std::invalid_argument("expected header 'samples <n> <count>'");
  }
  const std::size_t n = detail::parse_size(header[1], "variable count");
  const std::size_t count = detail::parse_size(header[2], "sample count");
  std::vector<Sample> raw;
  raw.reserve(count);
  while (raw.size() < count && std::getline(is, line)) {
    auto f = fields(line);
    // an empty model writes an empty bitstring
    if (n == 0 && f.size() == 2) f.insert(f.begin(), std::string());
    if (f.size() != 3) {
      throw std::invalid_argument("malformed sample record " + std::to_string(raw.size()));
    }
    raw.push_back({bits_from_string(f[0]), detail::parse_double(f[1], "energy"),
                   detail::parse_size(f[2], "occurrences")});
  }
  if (raw.size() != count) throw std::invalid_argument("truncated sample set");
  return SampleSet(n, std::move(raw));
}

/// energy(flip(bits, i)) - energy(bits), in O(degree(i)).
inline double flip_delta(const Adjacency& adj, const Assignment& bits, Index i) {
  if (i >= adj.num_variables()) {
    throw std::out_of_range("flip index " + std::to_string(i) + " out of range");
  }
  if (bits.size() != adj.num_variables()) {
    throw std::invalid_argument("assignment length does not match model size");
  }
  double field = adj.linear(i);
  for (std::size_t k = adj.begin(i); k < adj.end(i); ++k) {
    if (bits[adj.neighbour(k)]) field += adj.weight(k);
  }
  return bits[i] ? -field : field;
}

inline double flip_delta(const QuboModel& model, const Assignment& bits, Index i) {
  return flip_delta(Adjacency(model), bits, i);
}

/// Maximum number of variables solve_exhaustive accepts.
inline constexpr Index kExhaustiveLimit = 26;

/// The `keep` lowest-energy assignments over all 2^n, ties ordered by bits.
/// Enumeration walks a Gray code with incremental energies; every candidate
/// that reaches the kept set is re-evaluated exactly.
inline SampleSet solve_exhaustive(const QuboModel& model, std::size_t keep = 1) {
  const Index n = model.num_variables();
  if (n > kExhaustiveLimit) {
    throw std::invalid_argument("exhaustive solve supports at most " +
                                std::to_string(kExhaustiveLimit) + " variables, model has " +
                                std::to_string(n));
  }
  if (keep == 0) throw std::invalid_argument("keep must be positive");

  struct Entry {
    double energy;
    std::uint64_t key;  // bit i of the assignment at position n-1-i, so key order == lex order
    bool operator<(const Entry& o) const {
      return energy != o.energy ? energy < o.energy : key < o.key;
    }
  };

  const Adjacency adj(model);
  const double tol = 1e-9 * (1.0 + model.magnitude());
  Assignment bits(n, 0);
  std::vector<double> field(n, 0.0);
  double approx = model.offset();
  std::uint64_t key = 0;
  std::vector<Entry> heap;
  heap.reserve(keep + 1);

  auto resync = [&] {
    approx = model.energy(bits);
    for (Index i = 0; i < n; ++i) {
      double f = 0.0;
      for (std::size_t k = adj.begin(i); k < adj.end(i); ++k) {
        if (bits[adj.neighbour(k)]) f += adj.weight(k);
      }
      field[i] = f;
    }
  };

  auto offer = [&] {
    if (heap.size() == keep) {
      const Entry& worst = heap.front();
      if (approx > worst.energy + tol) return;
      Entry e{model.energy(bits), key};
      if (!(e < worst)) return;
      std::pop_heap(heap.begin(), heap.end());
      heap.back() = e;
      std::push_heap(heap.begin(), heap.end());
    } else {
      heap.push_back({model.energy(bits), key});
      std::push_heap(heap.begin(), heap.end());
    }
  };

  offer();
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t step = 1; step < total; ++step) {
    const Index i = static_cast<Index>(std::countr_zero(step));
    const double d = bits[i] ? -(adj.linear(i) + field[i]) : (adj.linear(i) + field[i]);
    bits[i] ^= 1;
    key ^= std::uint64_t{1} << (n - 1 - i);
    approx += d;
    const double s = bits[i] ? 1.0 : -1.0;
    for (std::size_t k = adj.begin(i); k < adj.end(i); ++k) {
      field[adj.neighbour(k)] += s * adj.weight(k);
    }
    if ((step & 0xFFFF) == 0) resync();
    offer();
  }

  std::sort(heap.begin(), heap.end());
  std::vector<Sample> out;
  out.reserve(heap.size());
  for (const auto& e : heap) {
    Assignment a(n);
    for (Index i = 0; i < n; ++i) a[i] = (e.key >> (n - 1 - i)) & 1;
    out.push_back({std::move(a), e.energy, 1});
  }
  return SampleSet(n, std::move(out));
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace detail

/// Seed of RNG stream `k` under master seed `seed`: splitmix64(seed ^ splitmix64(k)).
/// Read r uses stream r; the auto-schedule probe uses stream UINT64_MAX.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t k) {
  return detail::splitmix64(seed ^ detail::splitmix64(k));
}

struct AnnealParams {
  std::size_t reads = 1000;
  std::size_t sweeps = 200;
  std::optional<double> t_initial;  // auto when unset
  std::optional<double> t_final;    // auto when unset
  std::uint64_t seed = 0;
  unsigned threads = 1;  // 0 = hardware concurrency; never affects results
};

struct Schedule {
  double t_initial;
  double t_final;
};

inline Assignment random_assignment(Index n, std::mt19937_64& rng) {
  Assignment a(n);
  for (auto& b : a) b = static_cast<Bit>(rng() >> 63);
  return a;
}

/// Resolves unset temperatures: t_initial is the largest |single-flip delta|
/// from a random start, t_final is 1e-3 of t_initial.
inline Schedule resolve_schedule(const Adjacency& adj, const AnnealParams& p) {
  if (p.reads == 0) throw std::invalid_argument("reads must be at least 1");
  if (p.sweeps == 0) throw std::invalid_argument("sweeps must be at least 1");
  auto check_temp = [](std::optional<double> t, const char* name) {
    if (t && !(std::isfinite(*t) && *t > 0.0)) {
      throw std::invalid_argument(std::string(name) + " must be a positive finite temperature");
    }
  };
  check_temp(p.t_initial, "t_initial");
  check_temp(p.t_final, "t_final");

  double t0 = 0.0;
  if (p.t_initial) {
    t0 = *p.t_initial;
  } else {
    std::mt19937_64 rng(stream_seed(p.seed, ~std::uint64_t{0}));
    const Assignment start = random_assignment(adj.num_variables(), rng);
    for (Index i = 0; i < adj.num_variables(); ++i) {
      t0 = std::max(t0, std::abs(flip_delta(adj, start, i)));
    }
    if (!(t0 > 0.0)) t0 = 1.0;
  }
  const double t1 = p.t_final ? *p.t_final : 1e-3 * t0;
  if (!(t1 < t0)) throw std::invalid_argument("t_final must be below t_initial");
  return {t0, t1};
}

namespace detail {

// Returns the lowest-energy state the walk visited. Once the temperature drops
// below a penalty barrier the walk is trapped in one basin, so the final state
// alone throws away everything seen at intermediate temperatures.
inline Sample anneal_once(const QuboModel& model, const Adjacency& adj, const Schedule& sched,
                          std::size_t sweeps, std::uint64_t seed) {
  const Index n = adj.num_variables();
  std::mt19937_64 rng(seed);
  Assignment bits = random_assignment(n, rng);
  std::vector<double> field(n, 0.0);
  for (Index i = 0; i < n; ++i) {
    if (!bits[i]) continue;
    for (std::size_t k = adj.begin(i); k < adj.end(i); ++k) {
      field[adj.neighbour(k)] += adj.weight(k);
    }
  }
  double e = model.energy(bits);
  Assignment best = bits;
  double best_e = e;

  const double beta0 = 1.0 / sched.t_initial;
  const double beta1 = 1.0 / sched.t_final;
  const double ratio = beta1 / beta0;
  for (std::size_t sweep = 0; sweep < sweeps; ++sweep) {
    const double frac =
        sweeps == 1 ? 1.0 : static_cast<double>(sweep) / static_cast<double>(sweeps - 1);
    const double beta = beta0 * std::pow(ratio, frac);
    for (Index i = 0; i < n; ++i) {
      const double local = adj.linear(i) + field[i];
      const double d = bits[i] ? -local : local;
      if (d > 0.0 && unit_uniform(rng) >= std::exp(-beta * d)) continue;
      bits[i] ^= 1;
      e += d;
      const double s = bits[i] ? 1.0 : -1.0;
      for (std::size_t k = adj.begin(i); k < adj.end(i); ++k) {
        field[adj.neighbour(k)] += s * adj.weight(k);
      }
      if (e < best_e) {
        best_e = e;
        best = bits;
      }
    }
  }

  const double tol = 1e-6 * (1.0 + model.magnitude());
  if (std::abs(model.energy(bits) - e) > tol) {
    throw std::logic_error("incremental energy drifted from full evaluation");
  }
  const double exact = model.energy(best);
  if (std::abs(exact - best_e) > tol) {
    throw std::logic_error("incremental energy drifted from full evaluation");
  }
  return {std::move(best), exact, 1};
}

}  // namespace detail

/// Single-flip Metropolis annealing, `reads` independent restarts with
/// geometric inverse-temperature interpolation and a fixed 0..n-1 sweep order.
/// Each read reports the best state it visited. Output is identical for any
/// thread count.
inline SampleSet simulated_annealing(const QuboModel& model, const AnnealParams& p) {
  const Index n = model.num_variables();
  if (n == 0) throw std::invalid_argument("simulated annealing needs at least one variable");
  const Adjacency adj(model);
  const Schedule sched = resolve_schedule(adj, p);

  std::vector<Sample> reads(p.reads);
  unsigned workers = p.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                    : p.threads;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, p.reads));
  auto run = [&](unsigned w) {
    for (std::size_t r = w; r < p.reads; r += workers) {
      reads[r] = detail::anneal_once(model, adj, sched, p.sweeps, stream_seed(p.seed, r));
    }
  };
  if (workers <= 1) {
    run(0);
  } else {
    std::vector<std::jthread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          run(w);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    pool.clear();
    for (auto& err : errors) {
      if (err) std::rethrow_exception(err);
    }
  }
  return SampleSet(n, std::move(reads));
}

/// Seam for optimisation backends (annealing, enumeration, or a hardware client).
class Sampler {
 public:
  virtual ~Sampler() = default;
  virtual std::string name() const = 0;
  virtual SampleSet sample(const QuboModel& model) const = 0;
};

class ExhaustiveSampler final : public Sampler {
 public:
  explicit ExhaustiveSampler(std::size_t keep = 1) : keep_(keep) {}
  std::string name() const override { return "exhaustive"; }
  SampleSet sample(const QuboModel& model) const override {
    return solve_exhaustive(model, keep_);
  }

 private:
  std::size_t keep_;
};

class AnnealingSampler final : public Sampler {
 public:
  explicit AnnealingSampler(AnnealParams params) : params_(params) {}
  std::string name() const override { return "sa"; }
  SampleSet sample(const QuboModel& model) const override {
    return simulated_annealing(model, params_);
  }
  const AnnealParams& params() const { return params_; }

 private:
  AnnealParams params_;
};

}  // namespace qadb
