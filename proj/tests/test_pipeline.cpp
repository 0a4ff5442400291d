#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include <unistd.h>

#include "qadb/pipeline.hpp"

using namespace qadb;
using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

const char* kChain3 = R"({
  "relations": [{"name": "A", "cardinality": 10}, {"name": "B", "cardinality": 100},
                {"name": "C", "cardinality": 1000}],
  "predicates": [{"a": "A", "b": "B", "selectivity": 0.1}, {"a": 1, "b": 2, "selectivity": 0.01}]
})";

const char* kPair = R"({"relations": [{"name": "A", "cardinality": 50}, {"name": "B", "cardinality": 7}],
  "predicates": [{"a": 0, "b": 1, "selectivity": 0.5}]})";

const char* kEdgeless = R"({"isolation": "serializable", "transactions": [
  {"id": "T1", "reads": ["a"], "writes": ["b"]},
  {"id": "T2", "reads": ["c"], "writes": ["d"]},
  {"id": "T3", "reads": ["a", "c"], "writes": []}]})";

// T_i writes o_i and o_{i+1 mod 5}: a 5-cycle under both isolation levels
const char* kCycle5 = R"({"isolation": "snapshot", "transactions": [
  {"id": "T0", "writes": ["o0", "o1"]}, {"id": "T1", "writes": ["o1", "o2"]},
  {"id": "T2", "writes": ["o2", "o3"]}, {"id": "T3", "writes": ["o3", "o4"]},
  {"id": "T4", "writes": ["o4", "o0"]}]})";

const char* kForced = R"({"tasks": [{"id": "t", "demand": 1}],
  "vms": [{"id": "v", "capacity": 2, "footprint": 1}],
  "pms": [{"id": "p", "capacity": 2, "carbon_rate": 3}]})";

const char* kCrowded = R"({"tasks": [{"id": "a", "demand": 2}, {"id": "b", "demand": 2}],
  "vms": [{"id": "v", "capacity": 3, "footprint": 1}],
  "pms": [{"id": "p", "capacity": 4, "carbon_rate": 1}]})";

PipelineOptions options(Problem p, SamplerKind s = SamplerKind::exhaustive) {
  PipelineOptions o;
  o.problem = p;
  o.sampler = s;
  o.anneal.reads = 50;
  o.anneal.sweeps = 50;
  o.anneal.seed = 5;
  return o;
}

std::string schema_path(const std::function<void()>& f) {
  try {
    f();
  } catch (const io::SchemaError& e) {
    return e.path();
  }
  return "<no error>";
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("qadb-" + tag + "-" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  void write(const std::string& name, const std::string& text) const {
    std::ofstream(path / name) << text;
  }
};

std::string run_bench(const fs::path& dir, PipelineOptions o, BenchOptions b) {
  std::ostringstream os;
  bench(dir.string(), o, b, os);
  return os.str();
}

}  // namespace

TEST_CASE("schema errors name the offending field") {
  using io::json;
  CHECK(schema_path([] { io::query_from_json(json::parse(R"({"relations": 3})")); }) == "$.relations");
  CHECK(schema_path([] {
          io::query_from_json(json::parse(
              R"({"relations": [{"name": "A", "cardinality": 10}, {"name": "B", "cardinality": "x"}]})"));
        }) == "$.relations[1].cardinality");
  CHECK(schema_path([] {
          io::query_from_json(json::parse(
              R"({"relations": [{"name": "A", "cardinality": 10}, {"name": "B", "cardinality": 5}],
                  "predicates": [{"a": "A", "b": "Z", "selectivity": 0.5}]})"));
        }) == "$.predicates[0].b");
  CHECK(schema_path([] {
          io::workload_from_json(json::parse(R"({"isolation": "chaos", "transactions": []})"));
        }) == "$.isolation");
  CHECK(schema_path([] {
          io::workload_from_json(json::parse(
              R"({"isolation": "snapshot", "transactions": [{"id": "T", "reads": [true]}]})"));
        }).rfind("$.transactions[0].reads", 0) == 0);
  CHECK(schema_path([] {
          io::cloud_from_json(json::parse(
              R"({"tasks": [], "vms": [], "pms": [{"id": "p", "capacity": 2, "carbon_rate": -1}]})"));
        }) == "$.pms[0].carbon_rate");
  CHECK(schema_path([] { io::cloud_from_json(json::parse(R"({"tasks": [{"demand": 1}], "vms": [], "pms": []})")); }) ==
        "$.tasks[0].id");
  CHECK_THROWS_WITH(io::cloud_from_json(json::parse(R"({"tasks": [{"id": "t", "demand": 0}], "vms": [], "pms": []})")),
                    ContainsSubstring("$.tasks[0].demand"));
  CHECK_THROWS_AS(io::parse_json("{not json"), std::invalid_argument);
}

TEST_CASE("join pipeline matches the oracle") {
  auto o = options(Problem::join);
  o.oracle = true;
  const auto r = run_pipeline(io::parse_json(kChain3), "chain3", o);
  REQUIRE(r.objective);
  REQUIRE(r.oracle_objective);
  CHECK(std::abs(*r.objective - *r.oracle_objective) <= 1e-6);
  CHECK(r.optimal_hit() == std::optional<bool>(true));
  CHECK(r.num_variables == 9);
  CHECK(r.solution["order"].size() == 3);

  const auto j = qadb::to_json(r);
  CHECK(j["problem"] == "join");
  CHECK(j["optimal_hit"] == true);
  for (const char* phase : {"preprocess", "encode", "optimize", "readout"}) {
    CHECK((j["timings_ms"][phase].get<double>() >= 0.0));
  }
  CHECK_FALSE(qadb::to_json(r, false).contains("timings_ms"));
}

TEST_CASE("tx pipeline on an edgeless workload") {
  const auto r = run_pipeline(io::parse_json(kEdgeless), "edgeless", options(Problem::tx));
  CHECK(r.solution["violations"] == 0);
  for (const auto& [id, slot] : r.solution["slots"].items()) CHECK(slot == 0);
  CHECK(r.objective == std::optional<double>(0.0));
}

TEST_CASE("cloud pipeline on the forced instance") {
  auto o = options(Problem::cloud);
  o.oracle = true;
  const auto r = run_pipeline(io::parse_json(kForced), "forced", o);
  CHECK(r.solution["feasible"] == true);
  CHECK(r.solution["carbon"] == 3.0);
  CHECK(r.objective == std::optional<double>(3.0));
  CHECK(r.optimal_hit() == std::optional<bool>(true));
}

TEST_CASE("annealing pipeline also solves the small join") {
  const auto r = run_pipeline(io::parse_json(kChain3), "chain3", options(Problem::join, SamplerKind::sa));
  REQUIRE(r.objective);
  CHECK(*r.objective == Catch::Approx(std::log(100.0)).epsilon(1e-9));
}

TEST_CASE("oracle subcommand examples") {
  const auto j = run_oracle(io::parse_json(kPair), "pair", options(Problem::join));
  CHECK(j.solution["order"] == io::ordered_json({"A", "B"}));

  auto o = options(Problem::tx);
  o.slots = 2;
  const auto t = run_oracle(io::parse_json(kCycle5), "cycle", o);
  CHECK(t.solution["violations"] == 1);
  o.slots = 3;
  CHECK(run_oracle(io::parse_json(kCycle5), "cycle", o).solution["violations"] == 0);

  const auto c = run_oracle(io::parse_json(kCrowded), "crowded", options(Problem::cloud));
  CHECK(c.solution["feasible"] == false);
  CHECK(c.solution["report"] == "instance is infeasible");
  CHECK_FALSE(c.objective);
}

TEST_CASE("sampler guards propagate") {
  const char* wide = R"({"isolation": "snapshot", "transactions": [
    {"id": "a", "writes": ["x"]}, {"id": "b", "writes": ["x"]}, {"id": "c", "writes": ["x"]}]})";
  auto o = options(Problem::tx);
  o.slots = 9;
  CHECK_THROWS_WITH(run_pipeline(io::parse_json(wide), "wide", o), ContainsSubstring("26"));
}

TEST_CASE("csv quoting") {
  CHECK(detail::csv_field("plain.json") == "plain.json");
  CHECK(detail::csv_field("a,b.json") == "\"a,b.json\"");
  CHECK(detail::csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(detail::csv_number(std::nullopt).empty());
  CHECK(detail::csv_number(0.1) == "0.1");
}

TEST_CASE("bench tables") {
  const std::string header =
      "instance,repetition,seed,sampler,num_variables,best_energy,decoded_objective,"
      "oracle_objective,optimal_hit,repaired\n";

  TempDir empty("empty");
  CHECK(run_bench(empty.path, options(Problem::join), {}) == header);

  TempDir dir("join");
  dir.write("b,chain.json", kChain3);
  dir.write("a-pair.json", kPair);
  dir.write("notes.txt", "ignored");
  auto o = options(Problem::join, SamplerKind::sa);
  BenchOptions b;
  b.repetitions = 2;
  b.seed = 17;
  const std::string first = run_bench(dir.path, o, b);
  CHECK(first == run_bench(dir.path, o, b));
  o.anneal.threads = 4;
  CHECK(first == run_bench(dir.path, o, b));

  std::istringstream lines(first);
  std::vector<std::string> rows;
  for (std::string line; std::getline(lines, line);) rows.push_back(line);
  REQUIRE(rows.size() == 5);
  CHECK(rows[1].rfind("a-pair.json,0,", 0) == 0);
  CHECK(rows[3].rfind("\"b,chain.json\",0,", 0) == 0);
  CHECK(rows[1].find("," + std::to_string(bench_seed(17, "a-pair.json", 0)) + ",") != std::string::npos);

  b.seed = 18;
  CHECK(first != run_bench(dir.path, o, b));

  b.timings = true;
  const std::string timed = run_bench(dir.path, o, b);
  CHECK(timed.substr(0, timed.find('\n')) ==
        header.substr(0, header.size() - 1) + ",preprocess_ms,encode_ms,optimize_ms,readout_ms");

  CHECK_THROWS_AS(run_bench(dir.path / "missing", o, b), std::runtime_error);
}
