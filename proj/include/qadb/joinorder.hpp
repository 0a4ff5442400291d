#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qadb/qubo.hpp"
#include "qadb/sampler.hpp"

namespace qadb::join {

struct Relation {
  std::string name;
  double cardinality = 1.0;
};

struct Predicate {
  Index a = 0;
  Index b = 0;
  double selectivity = 1.0;
};

struct Query {
  std::vector<Relation> relations;
  std::vector<Predicate> predicates;

  Index size() const { return relations.size(); }
};

/// Natural-log cardinalities and selectivities. Pairs without a predicate
/// have selectivity 1 (log 0) and are absent from `ls`.
struct LogCoeffs {
  std::vector<double> lc;
  std::map<TermKey, double> ls;

  double selectivity(Index i, Index j) const {
    if (i > j) std::swap(i, j);
    auto it = ls.find({i, j});
    return it == ls.end() ? 0.0 : it->second;
  }
};

struct JoinOrder {
  std::vector<Index> order;
  bool repaired = false;
};

/// Variable x_{i,p} (relation i at position p) lives at index i*n + p.
struct JoVarMap {
  Index n = 0;
  Index index(Index relation, Index position) const { return relation * n + position; }
  Index num_variables() const { return n * n; }
};

inline constexpr Index kMaxEncodedRelations = 12;
inline constexpr Index kMaxOracleRelations = 10;

inline void validate(const Query& q) {
  const Index n = q.size();
  if (n < 2) throw std::invalid_argument("query needs at least 2 relations");
  for (Index i = 0; i < n; ++i) {
    const double c = q.relations[i].cardinality;
    if (!std::isfinite(c) || c < 1.0) {
      throw std::invalid_argument("relation " + std::to_string(i) + " (" +
                                  q.relations[i].name + "): cardinality must be finite and >= 1");
    }
  }
  std::map<TermKey, Index> seen;
  for (Index k = 0; k < q.predicates.size(); ++k) {
    const auto& p = q.predicates[k];
    const std::string where = "predicate " + std::to_string(k);
    if (p.a >= n || p.b >= n) throw std::invalid_argument(where + ": relation index out of range");
    if (p.a == p.b) throw std::invalid_argument(where + ": joins a relation with itself");
    if (!(p.selectivity > 0.0 && p.selectivity <= 1.0)) {
      throw std::invalid_argument(where + ": selectivity must lie in (0, 1]");
    }
    const TermKey key{std::min(p.a, p.b), std::max(p.a, p.b)};
    if (!seen.emplace(key, k).second) {
      throw std::invalid_argument(where + ": duplicate predicate for relations " +
                                  std::to_string(key.first) + "," + std::to_string(key.second));
    }
  }
}

inline LogCoeffs log_coefficients(const Query& q) {
  validate(q);
  LogCoeffs out;
  out.lc.reserve(q.size());
  for (const auto& r : q.relations) out.lc.push_back(std::log(r.cardinality));
  for (const auto& p : q.predicates) {
    out.ls[{std::min(p.a, p.b), std::max(p.a, p.b)}] = std::log(p.selectivity);
  }
  return out;
}

inline bool is_permutation(const std::vector<Index>& order, Index n) {
  if (order.size() != n) return false;
  std::vector<bool> seen(n, false);
  for (Index r : order) {
    if (r >= n || seen[r]) return false;
    seen[r] = true;
  }
  return true;
}

namespace detail {

inline void check_order(const Query& q, const JoinOrder& o) {
  if (!is_permutation(o.order, q.size())) {
    throw std::invalid_argument("join order is not a permutation of the query's relations");
  }
}

// Number of prefixes t in [2, n-1] that contain a relation at 0-based position p.
inline double prefix_weight(Index p, Index n) {
  const Index first = std::max<Index>(p + 1, 2);
  return first > n - 1 ? 0.0 : static_cast<double>(n - first);
}

struct DenseLogs {
  std::vector<double> lc;
  std::vector<double> ls;  // n*n, symmetric, zero where no predicate
  Index n;
};

inline DenseLogs dense_logs(const LogCoeffs& c) {
  const Index n = c.lc.size();
  DenseLogs d{c.lc, std::vector<double>(n * n, 0.0), n};
  for (const auto& [key, v] : c.ls) {
    d.ls[key.first * n + key.second] = v;
    d.ls[key.second * n + key.first] = v;
  }
  return d;
}

inline double log_cost(const DenseLogs& d, const std::vector<Index>& order) {
  double total = 0.0;
  double prefix = d.lc[order[0]];
  for (Index t = 2; t <= d.n - 1; ++t) {
    const Index added = order[t - 1];
    prefix += d.lc[added];
    for (Index k = 0; k + 1 < t; ++k) prefix += d.ls[order[k] * d.n + added];
    total += prefix;
  }
  return total;
}

}  // namespace detail

/// Sum over prefixes t = 2..n-1 of ln|I_t|, where ln|I_t| adds the log
/// cardinalities and the log selectivities of predicates inside the prefix.
inline double log_cost(const Query& q, const JoinOrder& o) {
  const LogCoeffs c = log_coefficients(q);
  detail::check_order(q, o);
  return detail::log_cost(detail::dense_logs(c), o.order);
}

/// C_out-style cost: sum over prefixes t = 2..n-1 of the intermediate size |I_t|.
inline double true_cost(const Query& q, const JoinOrder& o) {
  validate(q);
  detail::check_order(q, o);
  std::map<TermKey, double> sel;
  for (const auto& p : q.predicates) sel[{std::min(p.a, p.b), std::max(p.a, p.b)}] = p.selectivity;
  const Index n = q.size();
  double total = 0.0;
  double size = q.relations[o.order[0]].cardinality;
  for (Index t = 2; t <= n - 1; ++t) {
    const Index added = o.order[t - 1];
    size *= q.relations[added].cardinality;
    for (Index k = 0; k + 1 < t; ++k) {
      auto it = sel.find({std::min(o.order[k], added), std::max(o.order[k], added)});
      if (it != sel.end()) size *= it->second;
    }
    total += size;
  }
  return total;
}

/// Upper bound on the objective magnitude: 1 + (n-2) * (sum lc + sum |ls|).
inline double auto_penalty(const Query& q) {
  const LogCoeffs c = log_coefficients(q);
  const double span = static_cast<double>(q.size() - 2);
  double s = 0.0;
  for (double v : c.lc) s += v;
  for (const auto& kv : c.ls) s += std::abs(kv.second);
  return 1.0 + span * s;
}

struct Encoding {
  QuboModel model;
  JoVarMap varmap;
  /// energy(embed(o)) - log_cost(o) for every permutation o. The scan (t = 1)
  /// and final-result (t = n) prefixes are left out of the objective, so this is 0.
  double constant = 0.0;
};

/// Positional one-hot encoding of left-deep orders over n*n variables.
/// On permutation assignments the energy equals log_cost; the one-hot
/// penalties vanish exactly there.
inline Encoding encode_join_order(const Query& q, std::optional<double> penalty = std::nullopt) {
  const LogCoeffs c = log_coefficients(q);
  const Index n = q.size();
  if (n > kMaxEncodedRelations) {
    throw std::invalid_argument("join order encoding supports at most " +
                                std::to_string(kMaxEncodedRelations) + " relations");
  }
  const double a = penalty ? *penalty : auto_penalty(q);
  if (!(std::isfinite(a) && a > 0.0)) throw std::invalid_argument("penalty must be positive");

  const JoVarMap vm{n};
  QuboModel m(vm.num_variables());

  for (Index i = 0; i < n; ++i) {
    for (Index p = 0; p < n; ++p) {
      const double w = detail::prefix_weight(p, n);
      if (w != 0.0 && c.lc[i] != 0.0) m.add_linear(vm.index(i, p), c.lc[i] * w);
    }
  }
  for (const auto& [pair, s] : c.ls) {
    if (s == 0.0) continue;
    for (Index p = 0; p < n; ++p) {
      for (Index r = 0; r < n; ++r) {
        const double w = detail::prefix_weight(std::max(p, r), n);
        if (w != 0.0) m.add_term(vm.index(pair.first, p), vm.index(pair.second, r), s * w);
      }
    }
  }

  // A * (sum_k x_k - 1)^2 = A * (1 - sum_k x_k + 2 sum_{k<l} x_k x_l)
  auto one_hot = [&](const std::vector<Index>& group) {
    m.add_offset(a);
    for (Index k = 0; k < group.size(); ++k) {
      m.add_linear(group[k], -a);
      for (Index l = k + 1; l < group.size(); ++l) m.add_term(group[k], group[l], 2.0 * a);
    }
  };
  std::vector<Index> group(n);
  for (Index i = 0; i < n; ++i) {
    for (Index p = 0; p < n; ++p) group[p] = vm.index(i, p);
    one_hot(group);
  }
  for (Index p = 0; p < n; ++p) {
    for (Index i = 0; i < n; ++i) group[i] = vm.index(i, p);
    one_hot(group);
  }
  return {std::move(m), vm, 0.0};
}

inline Assignment embed(const JoVarMap& vm, const JoinOrder& o) {
  if (!is_permutation(o.order, vm.n)) throw std::invalid_argument("order is not a permutation");
  Assignment bits(vm.num_variables(), 0);
  for (Index p = 0; p < vm.n; ++p) bits[vm.index(o.order[p], p)] = 1;
  return bits;
}

inline bool is_permutation_matrix(const JoVarMap& vm, const Assignment& bits) {
  for (Index i = 0; i < vm.n; ++i) {
    Index row = 0, col = 0;
    for (Index p = 0; p < vm.n; ++p) {
      row += bits[vm.index(i, p)];
      col += bits[vm.index(p, i)];
    }
    if (row != 1 || col != 1) return false;
  }
  return true;
}

/// Reads a join order from a sample. Positions holding exactly one
/// relation keep it (lower positions first, each relation placed once);
/// leftover relations fill leftover positions in ascending order.
inline JoinOrder decode_join_order(const JoVarMap& vm, const Assignment& bits) {
  if (bits.size() != vm.num_variables()) {
    throw std::invalid_argument("sample length does not match join encoding");
  }
  const Index n = vm.n;
  JoinOrder out;
  out.order.assign(n, n);
  std::vector<bool> placed(n, false);
  for (Index p = 0; p < n; ++p) {
    Index count = 0, who = n;
    for (Index i = 0; i < n; ++i) {
      if (bits[vm.index(i, p)]) {
        ++count;
        who = i;
      }
    }
    if (count == 1 && !placed[who]) {
      out.order[p] = who;
      placed[who] = true;
    }
  }
  Index next = 0;
  for (Index p = 0; p < n; ++p) {
    if (out.order[p] != n) continue;
    while (placed[next]) ++next;
    out.order[p] = next;
    placed[next] = true;
  }
  out.repaired = !is_permutation_matrix(vm, bits);
  return out;
}

inline JoinOrder decode_join_order(const JoVarMap& vm, const Sample& s) {
  return decode_join_order(vm, s.bits);
}

/// Exhaustive search over all n! left-deep orders; lexicographically first
/// among equal-cost orders.
inline JoinOrder oracle_best_order(const Query& q) {
  validate(q);
  const Index n = q.size();
  if (n > kMaxOracleRelations) {
    throw std::invalid_argument("join order oracle supports at most " +
                                std::to_string(kMaxOracleRelations) + " relations");
  }
  JoinOrder cur;
  cur.order.resize(n);
  std::iota(cur.order.begin(), cur.order.end(), Index{0});
  JoinOrder best = cur;
  const detail::DenseLogs logs = detail::dense_logs(log_coefficients(q));
  double best_cost = detail::log_cost(logs, cur.order);
  while (std::next_permutation(cur.order.begin(), cur.order.end())) {
    const double c = detail::log_cost(logs, cur.order);
    if (c < best_cost - 1e-12 * (1.0 + std::abs(best_cost))) {
      best_cost = c;
      best = cur;
    }
  }
  return best;
}

}  // namespace qadb::join
