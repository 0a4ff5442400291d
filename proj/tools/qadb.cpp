// Command-line runner for the encode / optimise / readout pipelines.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "qadb/pipeline.hpp"

namespace {

struct Flags {
  std::string problem = "join";
  std::string sampler = "sa";
  std::size_t reads = 1000;
  std::size_t sweeps = 200;
  std::optional<double> t_initial;
  std::optional<double> t_final;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::optional<std::size_t> slots;
  std::optional<double> penalty;
  double carbon_weight = 1.0;
  bool oracle = false;
  std::string out;
};

void add_problem_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--problem", f.problem, "join, tx or cloud")
      ->check(CLI::IsMember({"join", "tx", "cloud"}));
  cmd->add_option("--slots", f.slots, "slot count for tx (default: greedy colouring bound)");
  cmd->add_option("--penalty", f.penalty, "hard-constraint penalty (default: auto)");
  cmd->add_option("--carbon-weight", f.carbon_weight, "carbon objective weight for cloud");
}

void add_sampler_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--sampler", f.sampler, "sa or exhaustive")
      ->check(CLI::IsMember({"sa", "exhaustive"}));
  cmd->add_option("--reads", f.reads, "annealing restarts");
  cmd->add_option("--sweeps", f.sweeps, "sweeps per read");
  cmd->add_option("--t-initial", f.t_initial, "initial temperature (default: auto)");
  cmd->add_option("--t-final", f.t_final, "final temperature (default: auto)");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--threads", f.threads, "worker threads for reads (0 = all cores)");
}

qadb::PipelineOptions options(const Flags& f) {
  qadb::PipelineOptions o;
  o.problem = qadb::parse_problem(f.problem);
  o.sampler = qadb::parse_sampler(f.sampler);
  o.anneal.reads = f.reads;
  o.anneal.sweeps = f.sweeps;
  o.anneal.t_initial = f.t_initial;
  o.anneal.t_final = f.t_final;
  o.anneal.seed = f.seed;
  o.anneal.threads = f.threads;
  o.penalty = f.penalty;
  o.carbon_weight = f.carbon_weight;
  if (f.slots) o.slots = *f.slots;
  o.oracle = f.oracle;
  return o;
}

void emit(const std::string& text, const std::string& out) {
  std::cout << text;
  if (!out.empty()) {
    std::ofstream file(out, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write '" + out + "'");
    file << text;
  }
}

qadb::QuboModel encode(const std::string& path, const qadb::PipelineOptions& o) {
  const auto doc = qadb::io::parse_json(qadb::io::read_file(path));
  switch (o.problem) {
    case qadb::Problem::join:
      return qadb::join::encode_join_order(qadb::io::query_from_json(doc), o.penalty).model;
    case qadb::Problem::tx: {
      const auto g = qadb::tx::conflicts(qadb::io::workload_from_json(doc));
      const qadb::Index slots = o.slots ? *o.slots : std::max<qadb::Index>(1, qadb::tx::greedy_slot_bound(g));
      return qadb::tx::encode_schedule(g, slots, o.penalty).model;
    }
    case qadb::Problem::cloud:
      return qadb::cloud::encode_allocation(qadb::io::cloud_from_json(doc), o.penalty, o.carbon_weight)
          .model;
  }
  throw std::logic_error("unreachable");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"QUBO pipelines for join ordering, transaction scheduling and cloud allocation"};
  app.require_subcommand(1);
  Flags f;
  std::string instance;
  std::string directory;
  std::size_t repetitions = 1;
  bool timings = false;

  auto* run = app.add_subcommand("run", "preprocess, encode, optimise and read out an instance");
  run->add_option("instance", instance, "instance JSON file")->required();
  add_problem_flags(run, f);
  add_sampler_flags(run, f);
  run->add_flag("--oracle", f.oracle, "cross-check against the brute-force oracle");
  run->add_option("--out", f.out, "also write the report to this file");

  auto* oracle = app.add_subcommand("oracle", "solve an instance with the brute-force oracle");
  oracle->add_option("instance", instance, "instance JSON file")->required();
  add_problem_flags(oracle, f);
  oracle->add_option("--out", f.out, "also write the report to this file");

  auto* benchcmd = app.add_subcommand("bench", "run every instance in a directory, emit CSV");
  benchcmd->add_option("directory", directory, "directory of instance JSON files")->required();
  benchcmd->add_option("--repetitions", repetitions, "runs per instance");
  benchcmd->add_flag("--timings", timings, "append wall-clock phase columns");
  add_problem_flags(benchcmd, f);
  add_sampler_flags(benchcmd, f);
  benchcmd->add_option("--out", f.out, "also write the CSV to this file");

  auto* enc = app.add_subcommand("encode", "emit the QUBO text for an instance");
  enc->add_option("instance", instance, "instance JSON file")->required();
  add_problem_flags(enc, f);
  enc->add_option("--out", f.out, "also write the QUBO to this file");

  auto* solve = app.add_subcommand("solve", "sample a QUBO text file directly");
  solve->add_option("qubo", instance, "QUBO text file")->required();
  add_sampler_flags(solve, f);
  solve->add_option("--keep", repetitions, "samples kept by the exhaustive sampler");
  solve->add_option("--out", f.out, "also write the sample set to this file");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto o = options(f);
    if (run->parsed()) {
      const auto report = qadb::run_pipeline(instance, o);
      emit(qadb::to_json(report).dump(2) + "\n", f.out);
    } else if (oracle->parsed()) {
      const auto report = qadb::run_oracle(instance, o);
      emit(qadb::to_json(report).dump(2) + "\n", f.out);
    } else if (benchcmd->parsed()) {
      std::ostringstream csv;
      qadb::bench(directory, o, {repetitions, f.seed, timings}, csv);
      emit(csv.str(), f.out);
    } else if (enc->parsed()) {
      emit(qadb::to_qubo_text(encode(instance, o)), f.out);
    } else if (solve->parsed()) {
      std::ifstream in(instance);
      if (!in) throw std::runtime_error("cannot read file '" + instance + "'");
      const auto model = qadb::read_qubo(in);
      const auto samples = o.sampler == qadb::SamplerKind::exhaustive
                               ? qadb::solve_exhaustive(model, repetitions)
                               : qadb::simulated_annealing(model, o.anneal);
      std::ostringstream text;
      qadb::write_sampleset(text, samples);
      emit(text.str(), f.out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
