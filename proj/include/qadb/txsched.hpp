#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qadb/qubo.hpp"
#include "qadb/sampler.hpp"

namespace qadb::tx {

enum class Isolation { serializable, snapshot };

struct Transaction {
  std::string id;
  std::set<std::string> reads;
  std::set<std::string> writes;
};

struct Workload {
  std::vector<Transaction> transactions;
  Isolation isolation = Isolation::serializable;

  Index size() const { return transactions.size(); }
};

class ConflictGraph {
 public:
  ConflictGraph() = default;
  explicit ConflictGraph(Index n) : n_(n) {}

  Index size() const { return n_; }
  const std::set<TermKey>& edges() const { return edges_; }

  void add_edge(Index i, Index j) {
    if (i >= n_ || j >= n_) throw std::out_of_range("conflict edge endpoint out of range");
    if (i == j) throw std::invalid_argument("conflict graph has no self-edges");
    edges_.insert({std::min(i, j), std::max(i, j)});
  }

  bool adjacent(Index i, Index j) const {
    return edges_.count({std::min(i, j), std::max(i, j)}) > 0;
  }

  std::vector<Index> neighbours(Index i) const {
    std::vector<Index> out;
    for (const auto& [a, b] : edges_) {
      if (a == i) out.push_back(b);
      if (b == i) out.push_back(a);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  Index n_ = 0;
  std::set<TermKey> edges_;
};

struct Schedule {
  std::vector<Index> slot;
  std::size_t violations = 0;
  Index makespan = 0;
  bool repaired = false;

  Index slot_sum() const {
    Index s = 0;
    for (Index v : slot) s += v;
    return s;
  }
};

inline void validate(const Workload& w) {
  std::set<std::string> ids;
  for (const auto& t : w.transactions) {
    if (!ids.insert(t.id).second) {
      throw std::invalid_argument("duplicate transaction id '" + t.id + "'");
    }
  }
}

inline bool conflicting(const Transaction& a, const Transaction& b, Isolation iso) {
  auto writes_overlap = [](const std::set<std::string>& x, const std::set<std::string>& y) {
    auto i = x.begin();
    auto j = y.begin();
    while (i != x.end() && j != y.end()) {
      if (*i == *j) return true;
      if (*i < *j) ++i; else ++j;
    }
    return false;
  };
  if (writes_overlap(a.writes, b.writes)) return true;
  if (iso == Isolation::snapshot) return false;
  // serializable: a shared object written by at least one side
  return writes_overlap(a.writes, b.reads) || writes_overlap(a.reads, b.writes);
}

inline ConflictGraph conflicts(const Workload& w) {
  validate(w);
  ConflictGraph g(w.size());
  for (Index i = 0; i < w.size(); ++i) {
    for (Index j = i + 1; j < w.size(); ++j) {
      if (conflicting(w.transactions[i], w.transactions[j], w.isolation)) g.add_edge(i, j);
    }
  }
  return g;
}

/// Number of slots used by greedy first-fit colouring in index order.
inline Index greedy_slot_bound(const ConflictGraph& g) {
  std::vector<Index> colour(g.size(), 0);
  Index used = g.size() == 0 ? 0 : 1;
  for (Index i = 0; i < g.size(); ++i) {
    std::vector<bool> taken(g.size() + 1, false);
    for (Index j : g.neighbours(i)) {
      if (j < i) taken[colour[j]] = true;
    }
    Index c = 0;
    while (taken[c]) ++c;
    colour[i] = c;
    used = std::max(used, c + 1);
  }
  return used;
}

/// y_{i,s} (transaction i in slot s) lives at index i*slots + s.
struct SlotVarMap {
  Index n = 0;
  Index slots = 0;
  Index index(Index tx, Index slot) const { return tx * slots + slot; }
  Index num_variables() const { return n * slots; }
};

inline double auto_penalty(Index n, Index slots) {
  return 1.0 + static_cast<double>(n) * static_cast<double>(slots - 1);
}

struct Encoding {
  QuboModel model;
  SlotVarMap varmap;
};

/// A * sum_i (sum_s y_is - 1)^2 + A * sum_{(i,j) in E} sum_s y_is y_js + sum_i sum_s s * y_is
inline Encoding encode_schedule(const ConflictGraph& g, Index slots,
                                std::optional<double> penalty = std::nullopt) {
  if (slots == 0) throw std::invalid_argument("slot count must be at least 1");
  const Index n = g.size();
  const double a = penalty ? *penalty : auto_penalty(n, slots);
  if (!(std::isfinite(a) && a > 0.0)) throw std::invalid_argument("penalty must be positive");

  const SlotVarMap vm{n, slots};
  QuboModel m(vm.num_variables());
  for (Index i = 0; i < n; ++i) {
    m.add_offset(a);
    for (Index s = 0; s < slots; ++s) {
      m.add_linear(vm.index(i, s), static_cast<double>(s) - a);
      for (Index r = s + 1; r < slots; ++r) m.add_term(vm.index(i, s), vm.index(i, r), 2.0 * a);
    }
  }
  for (const auto& [i, j] : g.edges()) {
    for (Index s = 0; s < slots; ++s) m.add_term(vm.index(i, s), vm.index(j, s), a);
  }
  return {std::move(m), vm};
}

inline std::size_t count_violations(const ConflictGraph& g, const std::vector<Index>& slot) {
  std::size_t v = 0;
  for (const auto& [i, j] : g.edges()) {
    if (slot[i] == slot[j]) ++v;
  }
  return v;
}

inline Schedule make_schedule(const ConflictGraph& g, std::vector<Index> slot, bool repaired) {
  Schedule s;
  s.violations = count_violations(g, slot);
  s.makespan = slot.empty() ? 0 : *std::max_element(slot.begin(), slot.end()) + 1;
  s.slot = std::move(slot);
  s.repaired = repaired;
  return s;
}

/// One-hot transactions keep their slot, multi-slot ones keep the lowest set
/// slot, and unassigned ones (in index order) take the lowest slot free of
/// already placed neighbours. When every slot is taken they go to the slot
/// holding the fewest placed neighbours, lowest on ties.
inline Schedule decode_schedule(const SlotVarMap& vm, const Assignment& bits,
                                const ConflictGraph& g) {
  if (bits.size() != vm.num_variables()) {
    throw std::invalid_argument("sample length does not match schedule encoding");
  }
  if (g.size() != vm.n) throw std::invalid_argument("graph does not match schedule encoding");
  const Index unset = vm.slots;
  std::vector<Index> slot(vm.n, unset);
  bool repaired = false;
  for (Index i = 0; i < vm.n; ++i) {
    Index count = 0;
    for (Index s = 0; s < vm.slots; ++s) {
      if (!bits[vm.index(i, s)]) continue;
      if (count++ == 0) slot[i] = s;
    }
    if (count > 1) repaired = true;
  }
  for (Index i = 0; i < vm.n; ++i) {
    if (slot[i] != unset) continue;
    repaired = true;
    std::vector<Index> clash(vm.slots, 0);
    for (Index j : g.neighbours(i)) {
      if (slot[j] != unset) ++clash[slot[j]];
    }
    slot[i] = static_cast<Index>(std::min_element(clash.begin(), clash.end()) - clash.begin());
  }
  return make_schedule(g, std::move(slot), repaired);
}

inline Schedule decode_schedule(const SlotVarMap& vm, const Sample& s, const ConflictGraph& g) {
  return decode_schedule(vm, s.bits, g);
}

inline constexpr Index kMaxOracleTransactions = 10;
inline constexpr double kMaxOracleSchedules = 67108864.0;  // 2^26

/// Exhaustive minimum of (violations, slot sum) over all slots^n schedules,
/// lexicographically first slot vector among ties.
inline Schedule oracle_schedule(const ConflictGraph& g, Index slots) {
  const Index n = g.size();
  if (slots == 0) throw std::invalid_argument("slot count must be at least 1");
  if (n > kMaxOracleTransactions) {
    throw std::invalid_argument("schedule oracle supports at most " +
                                std::to_string(kMaxOracleTransactions) + " transactions");
  }
  if (std::pow(static_cast<double>(slots), static_cast<double>(n)) > kMaxOracleSchedules) {
    throw std::invalid_argument("schedule oracle enumeration exceeds 2^26 schedules");
  }
  std::vector<Index> cur(n, 0);
  std::vector<Index> best = cur;
  std::size_t best_v = count_violations(g, cur);
  Index best_sum = 0;
  // odometer with position 0 most significant gives lexicographic order
  while (true) {
    Index k = n;
    while (k > 0 && cur[k - 1] + 1 == slots) cur[--k] = 0;
    if (k == 0) break;
    ++cur[k - 1];
    const std::size_t v = count_violations(g, cur);
    Index sum = 0;
    for (Index x : cur) sum += x;
    if (v < best_v || (v == best_v && sum < best_sum)) {
      best_v = v;
      best_sum = sum;
      best = cur;
    }
  }
  return make_schedule(g, std::move(best), false);
}

}  // namespace qadb::tx
