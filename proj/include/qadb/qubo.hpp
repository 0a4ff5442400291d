#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

namespace qadb {

using Index = std::size_t;
using Bit = std::uint8_t;
using Assignment = std::vector<Bit>;
using TermKey = std::pair<Index, Index>;

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, std::string_view what) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("cannot parse " + std::string(what) + " from '" +
                                std::string(s) + "'");
  }
  return v;
}

inline std::size_t parse_size(std::string_view s, std::string_view what) {
  std::size_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("cannot parse " + std::string(what) + " from '" +
                                std::string(s) + "'");
  }
  return v;
}

}  // namespace detail

/// Quadratic model over binary variables, stored as an upper-triangular
/// coefficient map q_{i,j} (i <= j) plus a constant offset. Diagonal entries
/// act as linear terms since x*x == x for binary x.
///
///   E(x) = offset + sum_{i <= j} q_{i,j} x_i x_j
class QuboModel {
 public:
  QuboModel() = default;
  explicit QuboModel(Index n) : n_(n) {}

  /// Folds a dense square matrix: q_{i,j} = Q_ij + Q_ji for i < j, q_{i,i} = Q_ii.
  static QuboModel from_dense(const std::vector<std::vector<double>>& q,
                              double offset = 0.0) {
    QuboModel m(q.size());
    for (Index i = 0; i < q.size(); ++i) {
      if (q[i].size() != q.size()) {
        throw std::invalid_argument("dense matrix must be square");
      }
      for (Index j = 0; j < q.size(); ++j) {
        if (q[i][j] != 0.0) m.add_term(i, j, q[i][j]);
      }
    }
    m.add_offset(offset);
    return m;
  }

  Index num_variables() const { return n_; }
  double offset() const { return offset_; }
  const std::map<TermKey, double>& terms() const { return terms_; }
  std::size_t num_terms() const { return terms_.size(); }

  /// Accumulates w into the coefficient at (min(i,j), max(i,j)).
  QuboModel& add_term(Index i, Index j, double w) {
    if (i >= n_) {
      throw std::out_of_range("variable index " + std::to_string(i) +
                              " out of range for model with " + std::to_string(n_) +
                              " variables");
    }
    if (j >= n_) {
      throw std::out_of_range("variable index " + std::to_string(j) +
                              " out of range for model with " + std::to_string(n_) +
                              " variables");
    }
    if (!std::isfinite(w)) {
      throw std::invalid_argument("non-finite coefficient at (" + std::to_string(i) +
                                  "," + std::to_string(j) + ")");
    }
    if (i > j) std::swap(i, j);
    terms_[{i, j}] += w;
    return *this;
  }

  QuboModel& add_linear(Index i, double w) { return add_term(i, i, w); }

  QuboModel& add_offset(double c) {
    if (!std::isfinite(c)) throw std::invalid_argument("non-finite offset");
    offset_ += c;
    return *this;
  }

  /// Term-wise sum; the variable count is the larger of the two.
  QuboModel& add_model(const QuboModel& other) {
    if (other.n_ > n_) n_ = other.n_;
    for (const auto& [key, w] : other.terms_) add_term(key.first, key.second, w);
    return add_offset(other.offset_);
  }

  double coefficient(Index i, Index j) const {
    if (i > j) std::swap(i, j);
    auto it = terms_.find({i, j});
    return it == terms_.end() ? 0.0 : it->second;
  }

  double energy(const Assignment& bits) const {
    if (bits.size() != n_) {
      throw std::invalid_argument("assignment length " + std::to_string(bits.size()) +
                                  " does not match model size " + std::to_string(n_));
    }
    double e = offset_;
    for (const auto& [key, w] : terms_) {
      if (bits[key.first] && bits[key.second]) e += w;
    }
    return e;
  }

  /// Sum of absolute coefficients; a scale for floating-point tolerances.
  double magnitude() const {
    double s = std::abs(offset_);
    for (const auto& kv : terms_) s += std::abs(kv.second);
    return s;
  }

 private:
  Index n_ = 0;
  double offset_ = 0.0;
  std::map<TermKey, double> terms_;
};

inline double energy(const QuboModel& model, const Assignment& bits) {
  return model.energy(bits);
}

/// Spin-glass form: E(s) = offset + sum_i h_i s_i + sum_{i<j} J_ij s_i s_j,
/// s in {-1, +1}, related to the binary form by x = (1 + s) / 2.
struct IsingModel {
  std::vector<double> h;
  std::map<TermKey, double> j;
  double offset = 0.0;

  Index num_variables() const { return h.size(); }

  double energy(const std::vector<int>& spins) const {
    if (spins.size() != h.size()) {
      throw std::invalid_argument("spin vector length does not match model size");
    }
    double e = offset;
    for (Index i = 0; i < h.size(); ++i) e += h[i] * spins[i];
    for (const auto& [key, w] : j) e += w * spins[key.first] * spins[key.second];
    return e;
  }
};

inline std::vector<int> to_spins(const Assignment& bits) {
  std::vector<int> s(bits.size());
  for (Index i = 0; i < bits.size(); ++i) s[i] = bits[i] ? 1 : -1;
  return s;
}

inline IsingModel to_ising(const QuboModel& model) {
  IsingModel out;
  out.h.assign(model.num_variables(), 0.0);
  out.offset = model.offset();
  for (const auto& [key, w] : model.terms()) {
    const auto [i, k] = key;
    if (i == k) {
      out.h[i] += w / 2.0;
      out.offset += w / 2.0;
    } else {
      out.j[key] += w / 4.0;
      out.h[i] += w / 4.0;
      out.h[k] += w / 4.0;
      out.offset += w / 4.0;
    }
  }
  return out;
}

inline QuboModel from_ising(const IsingModel& model) {
  const Index n = model.num_variables();
  QuboModel out(n);
  out.add_offset(model.offset);
  for (Index i = 0; i < n; ++i) {
    if (model.h[i] == 0.0) continue;
    out.add_linear(i, 2.0 * model.h[i]);
    out.add_offset(-model.h[i]);
  }
  for (const auto& [key, w] : model.j) {
    const auto [i, k] = key;
    if (i == k || i >= n || k >= n) {
      throw std::invalid_argument("ising coupling key must satisfy i < j < n");
    }
    out.add_term(i, k, 4.0 * w);
    out.add_linear(i, -2.0 * w);
    out.add_linear(k, -2.0 * w);
    out.add_offset(w);
  }
  return out;
}

// Text format:
//   qubo <n> <offset>
//   <i> <j> <w>        one line per stored term, i <= j
// Doubles use shortest round-trip decimal form.

inline void write_qubo(std::ostream& os, const QuboModel& model) {
  os << "qubo " << model.num_variables() << ' ' << detail::format_double(model.offset())
     << '\n';
  for (const auto& [key, w] : model.terms()) {
    os << key.first << ' ' << key.second << ' ' << detail::format_double(w) << '\n';
  }
}

inline std::string to_qubo_text(const QuboModel& model) {
  std::ostringstream os;
  write_qubo(os, model);
  return os.str();
}

inline QuboModel read_qubo(std::istream& is) {
  std::string line;
  std::size_t lineno = 0;
  auto fields = [](const std::string& l) {
    std::vector<std::string> out;
    std::istringstream ss(l);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
  };

  std::vector<std::string> header;
  while (std::getline(is, line)) {
    ++lineno;
    header = fields(line);
    if (!header.empty()) break;
  }
  if (header.size() != 3 || header[0] != "qubo") {
    throw std::invalid_argument("line " + std::to_string(lineno) +
                                ": expected header 'qubo <n> <offset>'");
  }
  QuboModel model(detail::parse_size(header[1], "variable count"));
  model.add_offset(detail::parse_double(header[2], "offset"));
  while (std::getline(is, line)) {
    ++lineno;
    auto f = fields(line);
    if (f.empty()) continue;
    if (f.size() != 3) {
      throw std::invalid_argument("line " + std::to_string(lineno) +
                                  ": expected term 'i j w'");
    }
    model.add_term(detail::parse_size(f[0], "index"), detail::parse_size(f[1], "index"),
                   detail::parse_double(f[2], "coefficient"));
  }
  return model;
}

inline QuboModel from_qubo_text(const std::string& text) {
  std::istringstream is(text);
  return read_qubo(is);
}

/// Compressed adjacency view of a model for incremental evaluation.
/// linear[i] = q_{i,i}; neighbours of i carry q_{min,max}.
class Adjacency {
 public:
  explicit Adjacency(const QuboModel& model) : n_(model.num_variables()) {
    linear_.assign(n_, 0.0);
    std::vector<std::size_t> degree(n_, 0);
    for (const auto& [key, w] : model.terms()) {
      if (key.first == key.second) {
        linear_[key.first] += w;
      } else {
        ++degree[key.first];
        ++degree[key.second];
      }
    }
    start_.assign(n_ + 1, 0);
    for (Index i = 0; i < n_; ++i) start_[i + 1] = start_[i] + degree[i];
    neighbour_.resize(start_[n_]);
    weight_.resize(start_[n_]);
    std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
    for (const auto& [key, w] : model.terms()) {
      if (key.first == key.second) continue;
      neighbour_[fill[key.first]] = key.second;
      weight_[fill[key.first]++] = w;
      neighbour_[fill[key.second]] = key.first;
      weight_[fill[key.second]++] = w;
    }
  }

  Index num_variables() const { return n_; }
  double linear(Index i) const { return linear_[i]; }
  std::size_t begin(Index i) const { return start_[i]; }
  std::size_t end(Index i) const { return start_[i + 1]; }
  Index neighbour(std::size_t k) const { return neighbour_[k]; }
  double weight(std::size_t k) const { return weight_[k]; }
  std::size_t degree(Index i) const { return start_[i + 1] - start_[i]; }

 private:
  Index n_;
  std::vector<double> linear_;
  std::vector<std::size_t> start_;
  std::vector<Index> neighbour_;
  std::vector<double> weight_;
};

}  // namespace qadb
