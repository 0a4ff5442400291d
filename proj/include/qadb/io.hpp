#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "qadb/cloudalloc.hpp"
#include "qadb/joinorder.hpp"
#include "qadb/txsched.hpp"

namespace qadb::io {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

/// Malformed instance data; `path` names the offending field, e.g. `$.relations[2].cardinality`.
class SchemaError : public std::invalid_argument {
 public:
  SchemaError(std::string path, const std::string& problem)
      : std::invalid_argument(path + ": " + problem), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

namespace detail {

inline std::string at(const std::string& path, const std::string& key) { return path + "." + key; }
inline std::string at(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

inline const json& field(const json& obj, const std::string& path, const std::string& key) {
  if (!obj.is_object()) throw SchemaError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(at(path, key), "missing required field");
  return *it;
}

inline const json& array_field(const json& obj, const std::string& path, const std::string& key) {
  const json& v = field(obj, path, key);
  if (!v.is_array()) throw SchemaError(at(path, key), "expected an array");
  return v;
}

inline double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw SchemaError(path, "expected a number");
  return v.get<double>();
}

inline std::string string(const json& v, const std::string& path) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw SchemaError(path, "expected a string");
}

inline std::set<std::string> string_set(const json& v, const std::string& path) {
  if (!v.is_array()) throw SchemaError(path, "expected an array of object names");
  std::set<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.insert(string(v[i], at(path, i)));
  return out;
}

}  // namespace detail

inline json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError("$", std::string("invalid JSON: ") + e.what());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// {"relations":[{"name":..,"cardinality":..}],"predicates":[{"a":..,"b":..,"selectivity":..}]}
// Predicate endpoints are relation indices or relation names.
inline join::Query query_from_json(const json& doc) {
  using namespace detail;
  join::Query q;
  const json& rels = array_field(doc, "$", "relations");
  std::map<std::string, Index> by_name;
  for (std::size_t i = 0; i < rels.size(); ++i) {
    const std::string p = at("$.relations", i);
    join::Relation r;
    r.name = string(field(rels[i], p, "name"), at(p, "name"));
    r.cardinality = number(field(rels[i], p, "cardinality"), at(p, "cardinality"));
    if (!(std::isfinite(r.cardinality) && r.cardinality >= 1.0)) {
      throw SchemaError(at(p, "cardinality"), "cardinality must be finite and >= 1");
    }
    if (!by_name.emplace(r.name, i).second) throw SchemaError(at(p, "name"), "duplicate relation name");
    q.relations.push_back(std::move(r));
  }
  if (q.relations.size() < 2) throw SchemaError("$.relations", "need at least 2 relations");

  const json empty = json::array();
  const json& preds = doc.contains("predicates") ? array_field(doc, "$", "predicates") : empty;
  auto endpoint = [&](const json& v, const std::string& p) -> Index {
    if (v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0)) {
      const auto i = v.get<std::size_t>();
      if (i >= q.relations.size()) throw SchemaError(p, "relation index out of range");
      return i;
    }
    if (v.is_string()) {
      auto it = by_name.find(v.get<std::string>());
      if (it == by_name.end()) throw SchemaError(p, "unknown relation '" + v.get<std::string>() + "'");
      return it->second;
    }
    throw SchemaError(p, "expected a relation index or name");
  };
  std::set<TermKey> seen;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    const std::string p = at("$.predicates", k);
    join::Predicate pr;
    pr.a = endpoint(field(preds[k], p, "a"), at(p, "a"));
    pr.b = endpoint(field(preds[k], p, "b"), at(p, "b"));
    pr.selectivity = number(field(preds[k], p, "selectivity"), at(p, "selectivity"));
    if (pr.a == pr.b) throw SchemaError(at(p, "b"), "predicate joins a relation with itself");
    if (!(pr.selectivity > 0.0 && pr.selectivity <= 1.0)) {
      throw SchemaError(at(p, "selectivity"), "selectivity must lie in (0, 1]");
    }
    if (!seen.insert({std::min(pr.a, pr.b), std::max(pr.a, pr.b)}).second) {
      throw SchemaError(p, "duplicate predicate for this relation pair");
    }
    q.predicates.push_back(pr);
  }
  return q;
}

// {"isolation":"serializable"|"snapshot","transactions":[{"id":..,"reads":[..],"writes":[..]}]}
inline tx::Workload workload_from_json(const json& doc) {
  using namespace detail;
  tx::Workload w;
  const json& iso = field(doc, "$", "isolation");
  const std::string mode = iso.is_string() ? iso.get<std::string>() : std::string();
  if (mode == "serializable") {
    w.isolation = tx::Isolation::serializable;
  } else if (mode == "snapshot") {
    w.isolation = tx::Isolation::snapshot;
  } else {
    throw SchemaError("$.isolation", "expected \"serializable\" or \"snapshot\"");
  }
  const json& txs = array_field(doc, "$", "transactions");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < txs.size(); ++i) {
    const std::string p = at("$.transactions", i);
    tx::Transaction t;
    t.id = string(field(txs[i], p, "id"), at(p, "id"));
    if (!ids.insert(t.id).second) throw SchemaError(at(p, "id"), "duplicate transaction id");
    if (txs[i].contains("reads")) t.reads = string_set(txs[i]["reads"], at(p, "reads"));
    if (txs[i].contains("writes")) t.writes = string_set(txs[i]["writes"], at(p, "writes"));
    w.transactions.push_back(std::move(t));
  }
  return w;
}

// {"tasks":[{"id":..,"demand":..}],"vms":[{"id":..,"capacity":..,"footprint":..}],
//  "pms":[{"id":..,"capacity":..,"carbon_rate":..}]}
inline cloud::CloudInstance cloud_from_json(const json& doc) {
  using namespace detail;
  cloud::CloudInstance c;
  auto positive = [](double v, const std::string& p) {
    if (!(std::isfinite(v) && v > 0.0)) throw SchemaError(p, "must be a positive number");
    return v;
  };
  auto unique = [](std::set<std::string>& ids, const std::string& id, const std::string& p) {
    if (!ids.insert(id).second) throw SchemaError(p, "duplicate id");
  };
  std::set<std::string> ids;
  const json& tasks = array_field(doc, "$", "tasks");
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const std::string p = at("$.tasks", i);
    cloud::Task t;
    t.id = string(field(tasks[i], p, "id"), at(p, "id"));
    unique(ids, t.id, at(p, "id"));
    t.demand = positive(number(field(tasks[i], p, "demand"), at(p, "demand")), at(p, "demand"));
    c.tasks.push_back(std::move(t));
  }
  ids.clear();
  const json& vms = array_field(doc, "$", "vms");
  for (std::size_t i = 0; i < vms.size(); ++i) {
    const std::string p = at("$.vms", i);
    cloud::VirtualMachine v;
    v.id = string(field(vms[i], p, "id"), at(p, "id"));
    unique(ids, v.id, at(p, "id"));
    v.capacity = positive(number(field(vms[i], p, "capacity"), at(p, "capacity")), at(p, "capacity"));
    v.footprint =
        positive(number(field(vms[i], p, "footprint"), at(p, "footprint")), at(p, "footprint"));
    c.vms.push_back(std::move(v));
  }
  ids.clear();
  const json& pms = array_field(doc, "$", "pms");
  for (std::size_t i = 0; i < pms.size(); ++i) {
    const std::string p = at("$.pms", i);
    cloud::PhysicalMachine m;
    m.id = string(field(pms[i], p, "id"), at(p, "id"));
    unique(ids, m.id, at(p, "id"));
    m.capacity = positive(number(field(pms[i], p, "capacity"), at(p, "capacity")), at(p, "capacity"));
    m.carbon_rate = number(field(pms[i], p, "carbon_rate"), at(p, "carbon_rate"));
    if (!(std::isfinite(m.carbon_rate) && m.carbon_rate >= 0.0)) {
      throw SchemaError(at(p, "carbon_rate"), "must be a non-negative number");
    }
    c.pms.push_back(std::move(m));
  }
  return c;
}

inline ordered_json to_json(const join::Query& q, const join::JoinOrder& o) {
  ordered_json out;
  ordered_json names = ordered_json::array();
  for (Index r : o.order) names.push_back(q.relations[r].name);
  out["order"] = names;
  out["log_cost"] = join::log_cost(q, o);
  out["true_cost"] = join::true_cost(q, o);
  out["repaired"] = o.repaired;
  return out;
}

inline ordered_json to_json(const tx::Workload& w, const tx::Schedule& s) {
  ordered_json out;
  ordered_json slots = ordered_json::object();
  for (Index i = 0; i < s.slot.size(); ++i) slots[w.transactions[i].id] = s.slot[i];
  out["slots"] = slots;
  out["violations"] = s.violations;
  out["makespan"] = s.makespan;
  out["repaired"] = s.repaired;
  return out;
}

inline ordered_json to_json(const cloud::CloudInstance& c, const cloud::Allocation& a) {
  const auto m = cloud::allocation_metrics(c, a);
  ordered_json out;
  ordered_json tasks = ordered_json::object();
  for (const auto& [t, pl] : a.task_assign) {
    tasks[c.tasks[t].id] = {{"vm", c.vms[pl.vm].id}, {"pm", c.pms[pl.pm].id}};
  }
  ordered_json vms = ordered_json::object();
  for (const auto& [v, p] : a.vm_place) vms[c.vms[v].id] = c.pms[p].id;
  ordered_json active = ordered_json::array();
  for (Index p : a.active_pms) active.push_back(c.pms[p].id);
  ordered_json breaches = ordered_json::array();
  for (const auto& b : a.breaches) breaches.push_back(b.text);
  out["task_assign"] = tasks;
  out["vm_place"] = vms;
  out["active_pms"] = active;
  out["carbon"] = m.carbon;
  out["feasible"] = m.feasible;
  out["violations"] = breaches;
  return out;
}

}  // namespace qadb::io
