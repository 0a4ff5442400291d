#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qadb/qubo.hpp"
#include "qadb/sampler.hpp"

namespace qadb::cloud {

struct Task {
  std::string id;
  double demand = 1.0;
};

struct VirtualMachine {
  std::string id;
  double capacity = 1.0;
  double footprint = 1.0;
};

struct PhysicalMachine {
  std::string id;
  double capacity = 1.0;
  double carbon_rate = 0.0;
};

struct CloudInstance {
  std::vector<Task> tasks;
  std::vector<VirtualMachine> vms;
  std::vector<PhysicalMachine> pms;
};

inline void validate(const CloudInstance& c) {
  auto unique = [](const auto& items, const char* what) {
    std::set<std::string> ids;
    for (const auto& it : items) {
      if (!ids.insert(it.id).second) {
        throw std::invalid_argument(std::string("duplicate ") + what + " id '" + it.id + "'");
      }
    }
  };
  unique(c.tasks, "task");
  unique(c.vms, "vm");
  unique(c.pms, "pm");
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  for (const auto& t : c.tasks) {
    if (!positive(t.demand)) throw std::invalid_argument("task " + t.id + ": demand must be positive");
  }
  for (const auto& v : c.vms) {
    if (!positive(v.capacity)) throw std::invalid_argument("vm " + v.id + ": capacity must be positive");
    if (!positive(v.footprint)) throw std::invalid_argument("vm " + v.id + ": footprint must be positive");
  }
  for (const auto& p : c.pms) {
    if (!positive(p.capacity)) throw std::invalid_argument("pm " + p.id + ": capacity must be positive");
    if (!(std::isfinite(p.carbon_rate) && p.carbon_rate >= 0.0)) {
      throw std::invalid_argument("pm " + p.id + ": carbon_rate must be non-negative");
    }
  }
}

/// Integer resource units used by the encoder: demands and footprints round
/// up, capacities round down.
struct Quantized {
  std::vector<std::int64_t> demand;
  std::vector<std::int64_t> vm_capacity;
  std::vector<std::int64_t> footprint;
  std::vector<std::int64_t> pm_capacity;
};

inline Quantized quantize(const CloudInstance& c) {
  auto up = [](double v) { return static_cast<std::int64_t>(std::ceil(v - 1e-9)); };
  auto down = [](double v) { return static_cast<std::int64_t>(std::floor(v + 1e-9)); };
  Quantized q;
  for (const auto& t : c.tasks) q.demand.push_back(up(t.demand));
  for (const auto& v : c.vms) {
    q.vm_capacity.push_back(down(v.capacity));
    q.footprint.push_back(up(v.footprint));
  }
  for (const auto& p : c.pms) q.pm_capacity.push_back(down(p.capacity));
  return q;
}

inline Index slack_width(std::int64_t capacity) {
  return capacity <= 0 ? 0 : static_cast<Index>(std::bit_width(static_cast<std::uint64_t>(capacity)));
}

/// Variable layout: x(t,v,p) triples, then z(v,p) placements, then a(p)
/// activations, then slack bits for each PM and each VM capacity constraint.
struct AllocVarMap {
  Index tasks = 0;
  Index vms = 0;
  Index pms = 0;
  std::vector<Index> pm_slack_start, pm_slack_bits;
  std::vector<Index> vm_slack_start, vm_slack_bits;
  Index total = 0;

  Index x(Index t, Index v, Index p) const { return (t * vms + v) * pms + p; }
  Index z(Index v, Index p) const { return tasks * vms * pms + v * pms + p; }
  Index a(Index p) const { return tasks * vms * pms + vms * pms + p; }
  Index num_variables() const { return total; }

  static AllocVarMap layout(const CloudInstance& c, const Quantized& q) {
    AllocVarMap m;
    m.tasks = c.tasks.size();
    m.vms = c.vms.size();
    m.pms = c.pms.size();
    Index next = m.tasks * m.vms * m.pms + m.vms * m.pms + m.pms;
    for (Index p = 0; p < m.pms; ++p) {
      m.pm_slack_start.push_back(next);
      m.pm_slack_bits.push_back(slack_width(q.pm_capacity[p]));
      next += m.pm_slack_bits.back();
    }
    for (Index v = 0; v < m.vms; ++v) {
      m.vm_slack_start.push_back(next);
      m.vm_slack_bits.push_back(slack_width(q.vm_capacity[v]));
      next += m.vm_slack_bits.back();
    }
    m.total = next;
    return m;
  }
};

inline double auto_penalty(const CloudInstance& c, double carbon_weight) {
  double s = 0.0;
  for (const auto& p : c.pms) s += p.carbon_rate;
  return 1.0 + carbon_weight * s;
}

struct Encoding {
  QuboModel model;
  AllocVarMap varmap;
};

namespace detail {

// A * (sum_k coeff_k y_k - target)^2
inline void add_squared(QuboModel& m, double a,
                        const std::vector<std::pair<Index, double>>& terms, double target) {
  m.add_offset(a * target * target);
  for (Index k = 0; k < terms.size(); ++k) {
    const auto [vk, ck] = terms[k];
    m.add_linear(vk, a * (ck * ck - 2.0 * target * ck));
    for (Index l = k + 1; l < terms.size(); ++l) {
      m.add_term(vk, terms[l].first, 2.0 * a * ck * terms[l].second);
    }
  }
}

}  // namespace detail

inline Encoding encode_allocation(const CloudInstance& c, std::optional<double> penalty = std::nullopt,
                                  double carbon_weight = 1.0) {
  validate(c);
  if (!(std::isfinite(carbon_weight) && carbon_weight > 0.0)) {
    throw std::invalid_argument("carbon weight must be positive");
  }
  const double a = penalty ? *penalty : auto_penalty(c, carbon_weight);
  if (!(std::isfinite(a) && a > 0.0)) throw std::invalid_argument("penalty must be positive");

  const Quantized q = quantize(c);
  if (!c.tasks.empty()) {
    const auto min_demand = *std::min_element(q.demand.begin(), q.demand.end());
    const bool vm_fits = std::any_of(q.vm_capacity.begin(), q.vm_capacity.end(),
                                     [&](std::int64_t cap) { return cap >= min_demand; });
    if (!vm_fits) throw std::invalid_argument("every vm capacity is below the smallest task demand");
    bool pm_fits = false;
    for (auto fp : q.footprint) {
      for (auto cap : q.pm_capacity) pm_fits = pm_fits || cap >= fp;
    }
    if (!pm_fits) throw std::invalid_argument("every pm capacity is below the smallest vm footprint");
  }

  const AllocVarMap vm = AllocVarMap::layout(c, q);
  const Index T = vm.tasks, V = vm.vms, P = vm.pms;
  QuboModel m(vm.num_variables());

  for (Index t = 0; t < T; ++t) {
    std::vector<std::pair<Index, double>> group;
    for (Index v = 0; v < V; ++v) {
      for (Index p = 0; p < P; ++p) group.push_back({vm.x(t, v, p), 1.0});
    }
    detail::add_squared(m, a, group, 1.0);
  }
  // linking x(1 - z)
  for (Index t = 0; t < T; ++t) {
    for (Index v = 0; v < V; ++v) {
      for (Index p = 0; p < P; ++p) {
        m.add_linear(vm.x(t, v, p), a);
        m.add_term(vm.x(t, v, p), vm.z(v, p), -a);
      }
    }
  }
  // VM placed on at most one PM
  for (Index v = 0; v < V; ++v) {
    for (Index p = 0; p < P; ++p) {
      for (Index r = p + 1; r < P; ++r) m.add_term(vm.z(v, p), vm.z(v, r), a);
    }
  }
  // activation z(1 - a)
  for (Index v = 0; v < V; ++v) {
    for (Index p = 0; p < P; ++p) {
      m.add_linear(vm.z(v, p), a);
      m.add_term(vm.z(v, p), vm.a(p), -a);
    }
  }
  for (Index p = 0; p < P; ++p) {
    std::vector<std::pair<Index, double>> row;
    for (Index v = 0; v < V; ++v) row.push_back({vm.z(v, p), static_cast<double>(q.footprint[v])});
    for (Index k = 0; k < vm.pm_slack_bits[p]; ++k) {
      row.push_back({vm.pm_slack_start[p] + k, std::ldexp(1.0, static_cast<int>(k))});
    }
    detail::add_squared(m, a, row, static_cast<double>(q.pm_capacity[p]));
  }
  for (Index v = 0; v < V; ++v) {
    std::vector<std::pair<Index, double>> row;
    for (Index t = 0; t < T; ++t) {
      for (Index p = 0; p < P; ++p) row.push_back({vm.x(t, v, p), static_cast<double>(q.demand[t])});
    }
    for (Index k = 0; k < vm.vm_slack_bits[v]; ++k) {
      row.push_back({vm.vm_slack_start[v] + k, std::ldexp(1.0, static_cast<int>(k))});
    }
    detail::add_squared(m, a, row, static_cast<double>(q.vm_capacity[v]));
  }
  for (Index p = 0; p < P; ++p) {
    if (c.pms[p].carbon_rate != 0.0) m.add_linear(vm.a(p), carbon_weight * c.pms[p].carbon_rate);
  }
  return {std::move(m), vm};
}

/// Carbon part of the encoded energy for a sample.
inline double carbon_energy(const CloudInstance& c, const AllocVarMap& vm, const Assignment& bits,
                            double carbon_weight) {
  double e = 0.0;
  for (Index p = 0; p < vm.pms; ++p) {
    if (bits[vm.a(p)]) e += carbon_weight * c.pms[p].carbon_rate;
  }
  return e;
}

/// Sets every slack register to capacity - load when that is representable,
/// the slack value that zeroes its capacity penalty.
inline Assignment complete_slack(const CloudInstance& c, const AllocVarMap& vm, Assignment bits) {
  const Quantized q = quantize(c);
  auto write = [&](Index start, Index width, std::int64_t value) {
    if (value < 0 || (width < 63 && value >= (std::int64_t{1} << width))) return;
    for (Index k = 0; k < width; ++k) bits[start + k] = (value >> k) & 1;
  };
  for (Index p = 0; p < vm.pms; ++p) {
    std::int64_t load = 0;
    for (Index v = 0; v < vm.vms; ++v) load += bits[vm.z(v, p)] ? q.footprint[v] : 0;
    write(vm.pm_slack_start[p], vm.pm_slack_bits[p], q.pm_capacity[p] - load);
  }
  for (Index v = 0; v < vm.vms; ++v) {
    std::int64_t load = 0;
    for (Index t = 0; t < vm.tasks; ++t) {
      for (Index p = 0; p < vm.pms; ++p) load += bits[vm.x(t, v, p)] ? q.demand[t] : 0;
    }
    write(vm.vm_slack_start[v], vm.vm_slack_bits[v], q.vm_capacity[v] - load);
  }
  return bits;
}

enum class BreachKind {
  task_unassigned,
  task_multiassigned,
  task_on_unplaced_vm,
  vm_multiplaced,
  vm_on_inactive_pm,
  pm_over_capacity,
  vm_over_capacity,
};

struct Breach {
  BreachKind kind;
  std::string subject;
  std::string text;
};

struct Placement {
  Index vm = 0;
  Index pm = 0;
  bool operator==(const Placement&) const = default;
};

struct Allocation {
  std::map<Index, Placement> task_assign;
  std::map<Index, Index> vm_place;
  std::set<Index> active_pms;
  std::vector<Breach> breaches;

  bool has_breach(BreachKind kind) const {
    return std::any_of(breaches.begin(), breaches.end(),
                       [&](const Breach& b) { return b.kind == kind; });
  }
};

/// Reads the x, z and a families and audits every hard constraint. Breached
/// samples are reported, not repaired. A task's PM follows its VM's placement.
inline Allocation decode_allocation(const AllocVarMap& vm, const Assignment& bits,
                                    const CloudInstance& c) {
  if (bits.size() != vm.num_variables()) {
    throw std::invalid_argument("sample length does not match allocation encoding");
  }
  if (c.tasks.size() != vm.tasks || c.vms.size() != vm.vms || c.pms.size() != vm.pms) {
    throw std::invalid_argument("instance does not match allocation encoding");
  }
  const Quantized q = quantize(c);
  Allocation out;
  auto breach = [&](BreachKind k, const std::string& subject, std::string text) {
    out.breaches.push_back({k, subject, std::move(text)});
  };

  for (Index p = 0; p < vm.pms; ++p) {
    if (bits[vm.a(p)]) out.active_pms.insert(p);
  }
  for (Index v = 0; v < vm.vms; ++v) {
    Index count = 0;
    for (Index p = 0; p < vm.pms; ++p) {
      if (!bits[vm.z(v, p)]) continue;
      if (count++ == 0) out.vm_place[v] = p;
      if (!bits[vm.a(p)]) {
        breach(BreachKind::vm_on_inactive_pm, c.vms[v].id,
               "vm on inactive pm: " + c.vms[v].id + "@" + c.pms[p].id);
      }
    }
    if (count > 1) breach(BreachKind::vm_multiplaced, c.vms[v].id, "vm multiply placed: " + c.vms[v].id);
  }
  for (Index t = 0; t < vm.tasks; ++t) {
    std::optional<Placement> first;
    Index count = 0;
    for (Index v = 0; v < vm.vms; ++v) {
      for (Index p = 0; p < vm.pms; ++p) {
        if (!bits[vm.x(t, v, p)]) continue;
        ++count;
        if (!first) first = Placement{v, p};
        if (!bits[vm.z(v, p)]) {
          breach(BreachKind::task_on_unplaced_vm, c.tasks[t].id,
                 "task on unplaced vm: " + c.tasks[t].id + " -> " + c.vms[v].id + "@" + c.pms[p].id);
        }
      }
    }
    if (count == 0) breach(BreachKind::task_unassigned, c.tasks[t].id, "task unassigned: " + c.tasks[t].id);
    if (count > 1) {
      breach(BreachKind::task_multiassigned, c.tasks[t].id, "task multiply assigned: " + c.tasks[t].id);
    }
    if (first) {
      auto it = out.vm_place.find(first->vm);
      if (it != out.vm_place.end()) out.task_assign[t] = Placement{first->vm, it->second};
    }
  }
  for (Index p = 0; p < vm.pms; ++p) {
    std::int64_t load = 0;
    for (Index v = 0; v < vm.vms; ++v) load += bits[vm.z(v, p)] ? q.footprint[v] : 0;
    if (load > q.pm_capacity[p]) {
      breach(BreachKind::pm_over_capacity, c.pms[p].id,
             "pm over capacity: " + c.pms[p].id + " (load " + std::to_string(load) + " > " +
                 std::to_string(q.pm_capacity[p]) + ")");
    }
  }
  for (Index v = 0; v < vm.vms; ++v) {
    std::int64_t load = 0;
    for (Index t = 0; t < vm.tasks; ++t) {
      for (Index p = 0; p < vm.pms; ++p) load += bits[vm.x(t, v, p)] ? q.demand[t] : 0;
    }
    if (load > q.vm_capacity[v]) {
      breach(BreachKind::vm_over_capacity, c.vms[v].id,
             "vm over capacity: " + c.vms[v].id + " (load " + std::to_string(load) + " > " +
                 std::to_string(q.vm_capacity[v]) + ")");
    }
  }
  return out;
}

inline Allocation decode_allocation(const AllocVarMap& vm, const Sample& s, const CloudInstance& c) {
  return decode_allocation(vm, s.bits, c);
}

struct Metrics {
  double carbon = 0.0;
  std::vector<double> pm_loads;
  std::vector<double> vm_loads;
  bool feasible = false;
};

inline Metrics allocation_metrics(const CloudInstance& c, const Allocation& a) {
  const Index T = c.tasks.size(), V = c.vms.size(), P = c.pms.size();
  for (const auto& [t, pl] : a.task_assign) {
    if (t >= T || pl.vm >= V || pl.pm >= P) {
      throw std::invalid_argument("allocation references an unknown task, vm or pm");
    }
  }
  for (const auto& [v, p] : a.vm_place) {
    if (v >= V || p >= P) throw std::invalid_argument("allocation references an unknown vm or pm");
  }
  for (Index p : a.active_pms) {
    if (p >= P) throw std::invalid_argument("allocation references an unknown pm");
  }

  Metrics m;
  m.pm_loads.assign(P, 0.0);
  m.vm_loads.assign(V, 0.0);
  for (Index p : a.active_pms) m.carbon += c.pms[p].carbon_rate;
  for (const auto& [v, p] : a.vm_place) m.pm_loads[p] += c.vms[v].footprint;
  bool consistent = a.task_assign.size() == T;
  for (const auto& [t, pl] : a.task_assign) {
    m.vm_loads[pl.vm] += c.tasks[t].demand;
    auto it = a.vm_place.find(pl.vm);
    consistent = consistent && it != a.vm_place.end() && it->second == pl.pm;
  }
  for (const auto& [v, p] : a.vm_place) consistent = consistent && a.active_pms.count(p) > 0;
  bool within = true;
  for (Index p = 0; p < P; ++p) within = within && m.pm_loads[p] <= c.pms[p].capacity;
  for (Index v = 0; v < V; ++v) within = within && m.vm_loads[v] <= c.vms[v].capacity;
  m.feasible = a.breaches.empty() && consistent && within;
  return m;
}

struct OracleResult {
  bool feasible = false;
  Allocation allocation;
  double carbon = 0.0;
};

inline constexpr double kMaxOracleChoices = 4194304.0;  // 2^22

/// Exhaustive search over every task -> (vm, pm) choice with consistent VM
/// placement; active PMs are exactly those hosting a used VM. Minimises
/// carbon among feasible allocations, first choice vector on ties.
inline OracleResult oracle_best_allocation(const CloudInstance& c) {
  validate(c);
  const Index T = c.tasks.size(), V = c.vms.size(), P = c.pms.size();
  const Index combos = V * P;
  if (std::pow(static_cast<double>(combos), static_cast<double>(T)) > kMaxOracleChoices) {
    throw std::invalid_argument("allocation oracle enumeration exceeds 2^22 choice vectors");
  }
  OracleResult best;
  if (T == 0) {
    best.feasible = true;
    return best;
  }
  if (combos == 0) return best;

  std::vector<Index> choice(T, 0);
  std::vector<double> vm_load(V), pm_load(P);
  std::vector<Index> vm_pm(V);
  std::vector<bool> vm_used(V), pm_used(P);
  do {
    std::fill(vm_load.begin(), vm_load.end(), 0.0);
    std::fill(pm_load.begin(), pm_load.end(), 0.0);
    std::fill(vm_used.begin(), vm_used.end(), false);
    std::fill(pm_used.begin(), pm_used.end(), false);
    bool ok = true;
    for (Index t = 0; t < T && ok; ++t) {
      const Index v = choice[t] / P, p = choice[t] % P;
      if (vm_used[v] && vm_pm[v] != p) ok = false;
      vm_used[v] = true;
      vm_pm[v] = p;
      vm_load[v] += c.tasks[t].demand;
    }
    for (Index v = 0; v < V && ok; ++v) {
      if (!vm_used[v]) continue;
      if (vm_load[v] > c.vms[v].capacity) ok = false;
      pm_load[vm_pm[v]] += c.vms[v].footprint;
      pm_used[vm_pm[v]] = true;
    }
    for (Index p = 0; p < P && ok; ++p) ok = pm_load[p] <= c.pms[p].capacity;
    if (ok) {
      double carbon = 0.0;
      for (Index p = 0; p < P; ++p) carbon += pm_used[p] ? c.pms[p].carbon_rate : 0.0;
      if (!best.feasible || carbon < best.carbon - 1e-12 * (1.0 + best.carbon)) {
        best.feasible = true;
        best.carbon = carbon;
        Allocation a;
        for (Index t = 0; t < T; ++t) a.task_assign[t] = Placement{choice[t] / P, choice[t] % P};
        for (Index v = 0; v < V; ++v) {
          if (vm_used[v]) a.vm_place[v] = vm_pm[v];
        }
        for (Index p = 0; p < P; ++p) {
          if (pm_used[p]) a.active_pms.insert(p);
        }
        best.allocation = std::move(a);
      }
    }
    // odometer, task 0 most significant
    Index k = T;
    while (k > 0 && choice[k - 1] + 1 == combos) choice[--k] = 0;
    if (k == 0) break;
    ++choice[k - 1];
  } while (true);
  return best;
}

}  // namespace qadb::cloud
