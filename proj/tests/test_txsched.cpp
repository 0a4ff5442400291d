#include <catch_amalgamated.hpp>

#include <random>

#include "qadb/txsched.hpp"
#include "support.hpp"

using namespace qadb;
using namespace qadb::tx;

namespace {

Workload two(Transaction a, Transaction b, Isolation iso) {
  Workload w;
  w.transactions = {std::move(a), std::move(b)};
  w.isolation = iso;
  return w;
}

ConflictGraph triangle() {
  ConflictGraph g(3);
  g.add_edge(0, 1);
  g.add_edge(1, 2);
  g.add_edge(0, 2);
  return g;
}

bool one_hot(const SlotVarMap& vm, const Assignment& x) {
  for (Index i = 0; i < vm.n; ++i) {
    Index c = 0;
    for (Index s = 0; s < vm.slots; ++s) c += x[vm.index(i, s)];
    if (c != 1) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("conflict definitions") {
  const Transaction t1{"T1", {"x"}, {"y"}};
  const Transaction t2{"T2", {"y"}, {}};
  CHECK(conflicts(two(t1, t2, Isolation::serializable)).adjacent(0, 1));
  CHECK(conflicts(two(t1, t2, Isolation::snapshot)).edges().empty());

  const Transaction w1{"T1", {}, {"x"}}, w2{"T2", {}, {"x"}};
  CHECK(conflicts(two(w1, w2, Isolation::serializable)).adjacent(0, 1));
  CHECK(conflicts(two(w1, w2, Isolation::snapshot)).adjacent(0, 1));

  const Transaction r1{"T1", {"x"}, {}}, r2{"T2", {"x"}, {}};
  CHECK(conflicts(two(r1, r2, Isolation::serializable)).edges().empty());
  CHECK(conflicts(two(r1, r2, Isolation::snapshot)).edges().empty());

  CHECK_THROWS_AS(conflicts(two(r1, r1, Isolation::snapshot)), std::invalid_argument);
}

TEST_CASE("conflicts agree with the naive definitions") {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 300; ++trial) {
    auto w = testing::random_workload(6, 5, rng, Isolation::serializable);
    const auto ser = conflicts(w);
    w.isolation = Isolation::snapshot;
    const auto snap = conflicts(w);
    for (Index i = 0; i < w.size(); ++i) {
      for (Index j = 0; j < w.size(); ++j) {
        if (i == j) continue;
        const auto& a = w.transactions[i];
        const auto& b = w.transactions[j];
        CHECK(ser.adjacent(i, j) == testing::naive_serializable_conflict(a, b));
        CHECK(snap.adjacent(i, j) == testing::naive_snapshot_conflict(a, b));
        CHECK(ser.adjacent(i, j) == ser.adjacent(j, i));
      }
    }
    for (const auto& e : snap.edges()) CHECK(ser.edges().count(e) == 1);
  }
}

TEST_CASE("conflict graph rejects self edges") {
  ConflictGraph g(2);
  CHECK_THROWS_AS(g.add_edge(1, 1), std::invalid_argument);
  CHECK_THROWS_AS(g.add_edge(0, 2), std::out_of_range);
}

TEST_CASE("edgeless graph schedules everything in slot 0") {
  for (Index slots : {1, 2, 3}) {
    const ConflictGraph g(3);
    const auto enc = encode_schedule(g, slots);
    const auto best = solve_exhaustive(enc.model).best();
    CHECK(best.energy == Catch::Approx(0.0).margin(1e-12));
    const auto s = decode_schedule(enc.varmap, best, g);
    CHECK(s.slot == std::vector<Index>{0, 0, 0});
    CHECK(s.violations == 0);
    CHECK(s.makespan == 1);
    CHECK_FALSE(s.repaired);
  }
}

TEST_CASE("single edge separates the pair") {
  ConflictGraph g(2);
  g.add_edge(0, 1);
  const auto enc = encode_schedule(g, 2);
  CHECK(enc.model.num_variables() == 4);
  const auto best = solve_exhaustive(enc.model).best();
  const auto s = decode_schedule(enc.varmap, best, g);
  CHECK(s.violations == 0);
  CHECK(s.slot_sum() == 1);
  CHECK(best.energy == Catch::Approx(1.0));
}

TEST_CASE("triangle needs three slots") {
  const ConflictGraph g = triangle();
  {
    const auto enc = encode_schedule(g, 2);
    const auto s = decode_schedule(enc.varmap, solve_exhaustive(enc.model).best(), g);
    CHECK(s.violations == 1);
  }
  {
    const auto enc = encode_schedule(g, 3);
    const auto best = solve_exhaustive(enc.model).best();
    const auto s = decode_schedule(enc.varmap, best, g);
    CHECK(s.violations == 0);
    CHECK(s.slot_sum() == 0 + 1 + 2);
    CHECK(best.energy == Catch::Approx(3.0));
  }
}

TEST_CASE("encoding guards") {
  CHECK_THROWS_AS(encode_schedule(ConflictGraph(2), 0), std::invalid_argument);
  CHECK_THROWS_AS(encode_schedule(ConflictGraph(2), 2, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(encode_schedule(ConflictGraph(2), 2, -3.0), std::invalid_argument);
}

TEST_CASE("decode examples") {
  ConflictGraph g(3);
  const SlotVarMap vm{3, 2};
  Assignment exact(6, 0);
  exact[vm.index(0, 1)] = exact[vm.index(1, 0)] = exact[vm.index(2, 1)] = 1;
  const auto s = decode_schedule(vm, exact, g);
  CHECK(s.slot == std::vector<Index>{1, 0, 1});
  CHECK_FALSE(s.repaired);

  const auto z = decode_schedule(vm, Assignment(6, 0), g);
  CHECK(z.slot == std::vector<Index>{0, 0, 0});
  CHECK(z.repaired);
  CHECK(z.violations == 0);

  ConflictGraph e(2);
  e.add_edge(0, 1);
  const auto p = decode_schedule(SlotVarMap{2, 2}, Assignment(4, 0), e);
  CHECK(p.slot == std::vector<Index>{0, 1});
  CHECK(p.repaired);
  CHECK(p.violations == 0);

  // multi-set keeps the lowest slot
  Assignment multi(4, 0);
  multi[1] = multi[0] = 1;
  multi[3] = 1;
  const auto m = decode_schedule(SlotVarMap{2, 2}, multi, e);
  CHECK(m.slot == std::vector<Index>{0, 1});
  CHECK(m.repaired);

  // every slot is blocked, so the dropped transaction joins the lighter one
  ConflictGraph star(4);
  star.add_edge(0, 1);
  star.add_edge(0, 2);
  star.add_edge(0, 3);
  Assignment hub(8, 0);
  hub[2] = hub[4] = hub[7] = 1;
  const auto h = decode_schedule(SlotVarMap{4, 2}, hub, star);
  CHECK(h.slot == std::vector<Index>{1, 0, 0, 1});
  CHECK(h.violations == 1);
}

TEST_CASE("decode is total") {
  std::mt19937_64 rng(73);
  for (int trial = 0; trial < 500; ++trial) {
    const Index n = 1 + rng() % 5, slots = 1 + rng() % 3;
    const auto g = testing::graph_from_mask(n, rng());
    const SlotVarMap vm{n, slots};
    const auto x = testing::bits_of(rng(), n * slots);
    const auto s = decode_schedule(vm, x, g);
    REQUIRE(s.slot.size() == n);
    for (Index v : s.slot) CHECK(v < slots);
    CHECK(s.violations == count_violations(g, s.slot));
    CHECK(s.repaired == !one_hot(vm, x));
  }
}

TEST_CASE("oracle schedules") {
  const auto edgeless = oracle_schedule(ConflictGraph(3), 2);
  CHECK(edgeless.slot == std::vector<Index>{0, 0, 0});
  CHECK(oracle_schedule(testing::cycle_graph(5), 2).violations == 1);
  CHECK(oracle_schedule(testing::cycle_graph(5), 3).violations == 0);
  CHECK_THROWS_AS(oracle_schedule(ConflictGraph(11), 2), std::invalid_argument);
  CHECK_THROWS_AS(oracle_schedule(ConflictGraph(10), 7), std::invalid_argument);
}

TEST_CASE("greedy slot bound is a valid colouring size") {
  CHECK(greedy_slot_bound(ConflictGraph(4)) == 1);
  CHECK(greedy_slot_bound(triangle()) == 3);
  CHECK(greedy_slot_bound(testing::cycle_graph(5)) == 3);
  std::mt19937_64 rng(79);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 1 + rng() % 6;
    const auto g = testing::graph_from_mask(n, rng());
    CHECK(oracle_schedule(g, greedy_slot_bound(g)).violations == 0);
  }
}

TEST_CASE("auto penalty dominates one-hot and conflict violations") {
  for (Index n = 1; n <= 3; ++n) {
    const Index pairs = n * (n - 1) / 2;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << pairs); ++mask) {
      const auto g = testing::graph_from_mask(n, mask);
      for (Index slots = 1; slots <= 3; ++slots) {
        const auto enc = encode_schedule(g, slots);
        double feasible = 1e300, other = 1e300;
        for (std::uint64_t code = 0; code < (std::uint64_t{1} << (n * slots)); ++code) {
          const auto x = testing::bits_of(code, n * slots);
          const double e = enc.model.energy(x);
          const bool ok = one_hot(enc.varmap, x) &&
                          decode_schedule(enc.varmap, x, g).violations == 0;
          (ok ? feasible : other) = std::min(ok ? feasible : other, e);
        }
        if (feasible < 1e300) CHECK(other > feasible);
      }
    }
  }
}
