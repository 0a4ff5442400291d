#pragma once

// Test-only generators and brute-force reference checks. Nothing here calls
// into the code paths it is used to verify.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "qadb/cloudalloc.hpp"
#include "qadb/joinorder.hpp"
#include "qadb/qubo.hpp"
#include "qadb/txsched.hpp"

namespace testing {

using qadb::Assignment;
using qadb::Index;

struct Triple {
  Index i, j;
  double w;
};

/// Random model as raw triples (possibly repeated, either orientation).
inline std::vector<Triple> random_triples(Index n, std::mt19937_64& rng, double density = 0.5) {
  std::uniform_real_distribution<double> coeff(-5.0, 5.0);
  std::bernoulli_distribution keep(density);
  std::vector<Triple> out;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (j < i && keep(rng)) out.push_back({i, j, coeff(rng)});
      if (j == i) out.push_back({i, i, coeff(rng)});
      if (j > i && keep(rng)) out.push_back({i, j, coeff(rng)});
    }
  }
  return out;
}

inline qadb::QuboModel build(Index n, const std::vector<Triple>& t, double offset = 0.0) {
  qadb::QuboModel m(n);
  for (const auto& x : t) m.add_term(x.i, x.j, x.w);
  m.add_offset(offset);
  return m;
}

inline qadb::QuboModel random_model(Index n, std::mt19937_64& rng, double density = 0.5) {
  std::uniform_real_distribution<double> off(-3.0, 3.0);
  return build(n, random_triples(n, rng, density), off(rng));
}

inline double triple_energy(const std::vector<Triple>& t, double offset, const Assignment& x) {
  double e = offset;
  for (const auto& tr : t) e += tr.w * x[tr.i] * x[tr.j];
  return e;
}

inline Assignment bits_of(std::uint64_t code, Index n) {
  Assignment a(n);
  for (Index i = 0; i < n; ++i) a[i] = (code >> i) & 1;
  return a;
}

/// Straight enumeration with full evaluation per assignment.
inline double naive_minimum(const qadb::QuboModel& m) {
  double best = std::numeric_limits<double>::infinity();
  const Index n = m.num_variables();
  for (std::uint64_t code = 0; code < (std::uint64_t{1} << n); ++code) {
    const Assignment a = bits_of(code, n);
    double e = m.offset();
    for (const auto& [key, w] : m.terms()) e += w * a[key.first] * a[key.second];
    best = std::min(best, e);
  }
  return best;
}

// ---------------------------------------------------------------- join

inline qadb::join::Query random_query(Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> log_card(std::log(10.0), std::log(1e6));
  std::uniform_real_distribution<double> log_sel(std::log(1e-4), 0.0);
  std::bernoulli_distribution extra_edge(0.3);
  qadb::join::Query q;
  for (Index i = 0; i < n; ++i) {
    q.relations.push_back({"r" + std::to_string(i), std::round(std::exp(log_card(rng)))});
  }
  // random spanning tree plus a few extra predicates
  for (Index i = 1; i < n; ++i) {
    std::uniform_int_distribution<Index> parent(0, i - 1);
    q.predicates.push_back({parent(rng), i, std::exp(log_sel(rng))});
  }
  std::set<std::pair<Index, Index>> used;
  for (const auto& p : q.predicates) used.insert({std::min(p.a, p.b), std::max(p.a, p.b)});
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      if (!used.count({i, j}) && extra_edge(rng)) q.predicates.push_back({i, j, std::exp(log_sel(rng))});
    }
  }
  return q;
}

/// log of the intermediate-result sizes, computed from products of raw
/// cardinalities and selectivities.
inline double product_log_cost(const qadb::join::Query& q, const std::vector<Index>& order) {
  const Index n = q.size();
  double total = 0.0;
  for (Index t = 2; t <= n - 1; ++t) {
    long double size = 1.0L;
    for (Index k = 0; k < t; ++k) size *= q.relations[order[k]].cardinality;
    for (const auto& p : q.predicates) {
      const bool has_a = std::find(order.begin(), order.begin() + t, p.a) != order.begin() + t;
      const bool has_b = std::find(order.begin(), order.begin() + t, p.b) != order.begin() + t;
      if (has_a && has_b) size *= p.selectivity;
    }
    total += static_cast<double>(std::log(size));
  }
  return total;
}

/// Heap's algorithm over all orders; returns the minimum product_log_cost.
inline double heap_enumerated_min(const qadb::join::Query& q) {
  const Index n = q.size();
  std::vector<Index> a(n);
  for (Index i = 0; i < n; ++i) a[i] = i;
  std::vector<Index> c(n, 0);
  double best = product_log_cost(q, a);
  Index i = 1;
  while (i < n) {
    if (c[i] < i) {
      if (i % 2 == 0) std::swap(a[0], a[i]); else std::swap(a[c[i]], a[i]);
      best = std::min(best, product_log_cost(q, a));
      ++c[i];
      i = 1;
    } else {
      c[i] = 0;
      ++i;
    }
  }
  return best;
}

// ---------------------------------------------------------------- tx

inline qadb::tx::Workload random_workload(Index max_tx, Index objects, std::mt19937_64& rng,
                                          qadb::tx::Isolation iso) {
  std::uniform_int_distribution<Index> count(1, max_tx);
  std::bernoulli_distribution touch(0.3);
  qadb::tx::Workload w;
  w.isolation = iso;
  const Index n = count(rng);
  for (Index i = 0; i < n; ++i) {
    qadb::tx::Transaction t;
    t.id = "T" + std::to_string(i);
    for (Index o = 0; o < objects; ++o) {
      const std::string name = "o" + std::to_string(o);
      if (touch(rng)) t.reads.insert(name);
      if (touch(rng)) t.writes.insert(name);
    }
    w.transactions.push_back(std::move(t));
  }
  return w;
}

/// Serializability: some object touched by both, written by at least one.
inline bool naive_serializable_conflict(const qadb::tx::Transaction& a, const qadb::tx::Transaction& b) {
  std::set<std::string> touched_a = a.reads, touched_b = b.reads;
  touched_a.insert(a.writes.begin(), a.writes.end());
  touched_b.insert(b.writes.begin(), b.writes.end());
  for (const auto& obj : touched_a) {
    if (!touched_b.count(obj)) continue;
    if (a.writes.count(obj) || b.writes.count(obj)) return true;
  }
  return false;
}

/// Snapshot isolation: both write some common object.
inline bool naive_snapshot_conflict(const qadb::tx::Transaction& a, const qadb::tx::Transaction& b) {
  for (const auto& obj : a.writes) {
    if (b.writes.count(obj)) return true;
  }
  return false;
}

inline qadb::tx::ConflictGraph cycle_graph(Index n) {
  qadb::tx::ConflictGraph g(n);
  for (Index i = 0; i < n; ++i) g.add_edge(i, (i + 1) % n);
  return g;
}

/// Graph on n nodes whose edge set is the bitmask `mask` over the pairs (i<j) in lex order.
inline qadb::tx::ConflictGraph graph_from_mask(Index n, std::uint64_t mask) {
  qadb::tx::ConflictGraph g(n);
  Index k = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j, ++k) {
      if ((mask >> k) & 1) g.add_edge(i, j);
    }
  }
  return g;
}

// ---------------------------------------------------------------- cloud

inline qadb::cloud::CloudInstance random_cloud(std::mt19937_64& rng, Index max_t = 3, Index max_v = 2,
                                               Index max_p = 2, int max_cap = 3) {
  std::uniform_int_distribution<Index> nt(1, max_t), nv(1, max_v), np(1, max_p);
  std::uniform_int_distribution<int> demand(1, 2), cap(1, max_cap), rate(0, 6);
  qadb::cloud::CloudInstance c;
  const Index T = nt(rng), V = nv(rng), P = np(rng);
  for (Index t = 0; t < T; ++t) c.tasks.push_back({"t" + std::to_string(t), double(demand(rng))});
  for (Index v = 0; v < V; ++v) c.vms.push_back({"v" + std::to_string(v), double(cap(rng)), double(demand(rng))});
  for (Index p = 0; p < P; ++p) c.pms.push_back({"p" + std::to_string(p), double(cap(rng)), double(rate(rng))});
  return c;
}

}  // namespace testing
