#pragma once

// Statevector simulator: Pauli rotations, brick entanglers and Pauli expectation values.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <functional>
#include <utility>
#include <vector>

#include "plateau/pauli.hpp"

namespace plateau {

inline constexpr std::size_t kMaxStateQubits = 24;

enum class InitKind { zeros, plus };

inline std::string_view to_string(InitKind k) { return k == InitKind::zeros ? "zeros" : "plus"; }

inline InitKind parse_init_kind(std::string_view s) {
  if (s == "zeros") return InitKind::zeros;
  if (s == "plus") return InitKind::plus;
  throw std::invalid_argument("unknown init kind '" + std::string(s) + "'");
}

enum class EntanglerKind { none, cz_brick, cx_brick };

inline std::string_view to_string(EntanglerKind k) {
  switch (k) {
    case EntanglerKind::none: return "none";
    case EntanglerKind::cz_brick: return "cz_brick";
    default: return "cx_brick";
  }
}

inline EntanglerKind parse_entangler_kind(std::string_view s) {
  if (s == "none") return EntanglerKind::none;
  if (s == "cz_brick") return EntanglerKind::cz_brick;
  if (s == "cx_brick") return EntanglerKind::cx_brick;
  throw std::invalid_argument("unknown entangler kind '" + std::string(s) + "'");
}

/// One layer of fixed two-qubit gates: the even column (0,1),(2,3),... then the
/// odd column (1,2),(3,4),... Pairs are (control, target).
class EntanglerPattern {
 public:
  using Pair = std::pair<std::size_t, std::size_t>;

  EntanglerPattern() = default;

  EntanglerPattern(EntanglerKind kind, std::size_t n) : kind_(kind), n_(n) {
    if (kind == EntanglerKind::none) return;
    for (std::size_t q = 0; q + 1 < n; q += 2) even_.emplace_back(q, q + 1);
    for (std::size_t q = 1; q + 1 < n; q += 2) odd_.emplace_back(q, q + 1);
    for (const auto& [a, b] : pairs()) {
      if (a >= n || b >= n) throw std::out_of_range("EntanglerPattern: index out of range");
    }
  }

  /// Explicit columns, e.g. the pairs of a pattern that survive a light-cone restriction.
  EntanglerPattern(EntanglerKind kind, std::size_t n, std::vector<Pair> even, std::vector<Pair> odd)
      : kind_(kind), n_(n), even_(std::move(even)), odd_(std::move(odd)) {
    for (const auto& col : {std::cref(even_), std::cref(odd_)}) {
      std::uint64_t used = 0;
      for (const auto& [a, b] : col.get()) {
        if (a >= n || b >= n || a == b) throw std::out_of_range("EntanglerPattern: index out of range");
        const std::uint64_t m = (std::uint64_t{1} << a) | (std::uint64_t{1} << b);
        if (used & m) throw std::invalid_argument("EntanglerPattern: qubit used twice in one column");
        used |= m;
      }
    }
  }

  EntanglerKind kind() const { return kind_; }
  bool empty() const { return kind_ == EntanglerKind::none || (even_.empty() && odd_.empty()); }
  std::size_t n_qubits() const { return n_; }
  const std::vector<Pair>& even_column() const { return even_; }
  const std::vector<Pair>& odd_column() const { return odd_; }

  /// All pairs in application order.
  std::vector<Pair> pairs() const {
    std::vector<Pair> all = even_;
    all.insert(all.end(), odd_.begin(), odd_.end());
    return all;
  }

 private:
  EntanglerKind kind_ = EntanglerKind::none;
  std::size_t n_ = 0;
  std::vector<Pair> even_;
  std::vector<Pair> odd_;
};

class StateVector {
 public:
  StateVector() = default;

  explicit StateVector(std::size_t n_qubits) : n_(n_qubits) {
    if (n_qubits == 0 || n_qubits > kMaxStateQubits) {
      throw std::invalid_argument("StateVector: qubit count must be in [1, 24]");
    }
    amps_.assign(std::size_t{1} << n_qubits, cplx{0.0, 0.0});
  }

  StateVector(std::size_t n_qubits, std::vector<cplx> amps) : StateVector(n_qubits) {
    if (amps.size() != amps_.size()) throw std::invalid_argument("StateVector: amplitude count mismatch");
    amps_ = std::move(amps);
  }

  std::size_t n_qubits() const { return n_; }
  std::size_t dim() const { return amps_.size(); }
  std::span<const cplx> amplitudes() const { return amps_; }
  std::span<cplx> amplitudes() { return amps_; }
  cplx operator[](std::size_t j) const { return amps_[j]; }
  cplx& operator[](std::size_t j) { return amps_[j]; }

  double norm() const {
    double s = 0.0;
    for (const auto& a : amps_) s += std::norm(a);
    return std::sqrt(s);
  }

  cplx inner(const StateVector& other) const {
    require_same(other);
    cplx s = 0.0;
    for (std::size_t j = 0; j < amps_.size(); ++j) s += std::conj(amps_[j]) * other.amps_[j];
    return s;
  }

  void reset(InitKind kind) {
    if (kind == InitKind::zeros) {
      std::fill(amps_.begin(), amps_.end(), cplx{0.0, 0.0});
      amps_[0] = 1.0;
    } else {
      const double a = 1.0 / std::sqrt(static_cast<double>(amps_.size()));
      std::fill(amps_.begin(), amps_.end(), cplx{a, 0.0});
    }
  }

  /// In place: v <- cos(theta/2) v - i sin(theta/2) P v.
  void rotate(const PauliString& p, double theta) {
    check_op(p, "apply_rotation");
    if (!p.hermitian()) throw std::invalid_argument("apply_rotation: generator must be Hermitian");
    const double c = std::cos(0.5 * theta);
    const double s = std::sin(0.5 * theta);
    const std::uint64_t x = p.x_bits();
    const std::uint64_t z = p.z_bits();
    // -i * s * i^#Y
    const cplx a = cplx{0.0, -s} * ipow(static_cast<unsigned>(p.y_count()));
    const std::size_t dim = amps_.size();
    cplx* v = amps_.data();
    if (x == 0) {
      const cplx plus = c + a;
      const cplx minus = c - a;
      for (std::uint64_t j = 0; j < dim; ++j) v[j] *= (std::popcount(j & z) & 1) ? minus : plus;
      return;
    }
    const unsigned pivot = static_cast<unsigned>(std::countr_zero(x));
    const std::uint64_t low = (std::uint64_t{1} << pivot) - 1;
    const std::size_t half = dim >> 1;
    for (std::uint64_t t = 0; t < half; ++t) {
      const std::uint64_t j = ((t & ~low) << 1) | (t & low);
      const std::uint64_t k = j ^ x;
      const double sj = (std::popcount(j & z) & 1) ? -1.0 : 1.0;
      const double sk = (std::popcount(k & z) & 1) ? -1.0 : 1.0;
      const cplx vj = v[j];
      const cplx vk = v[k];
      v[j] = c * vj + (a * sk) * vk;
      v[k] = c * vk + (a * sj) * vj;
    }
  }

  /// In place: every pair of the pattern (CZ phase on |11>, or CX bit flip).
  void entangle(const EntanglerPattern& pattern) {
    if (pattern.kind() == EntanglerKind::none) return;
    if (pattern.n_qubits() != n_) throw std::out_of_range("apply_entangler: pattern built for a different register");
    const std::size_t dim = amps_.size();
    if (pattern.kind() == EntanglerKind::cz_brick) {
      // All CZs commute and are diagonal: one pass with the parity of |11> pairs.
      std::uint64_t mask = 0;
      for (const auto& [a, b] : pattern.pairs()) mask |= pair_mask(a, b);
      for (std::uint64_t j = 0; j < dim; ++j) {
        if (std::popcount(j & (j >> 1) & mask) & 1) amps_[j] = -amps_[j];
      }
      return;
    }
    for (const auto& [ctrl, tgt] : pattern.pairs()) {
      const std::uint64_t cb = bit_of(ctrl);
      const std::uint64_t tb = bit_of(tgt);
      for (std::uint64_t j = 0; j < dim; ++j) {
        if ((j & cb) && !(j & tb)) std::swap(amps_[j], amps_[j | tb]);
      }
    }
  }

  /// <v|P|v>, real part; throws if P is not Hermitian or the imaginary residue exceeds 1e-10.
  double expectation(const PauliString& p) const {
    check_op(p, "expectation");
    if (!p.hermitian()) throw std::invalid_argument("expectation: observable must be Hermitian");
    const std::uint64_t x = p.x_bits();
    const std::uint64_t z = p.z_bits();
    const std::size_t dim = amps_.size();
    if (x == 0) {
      double acc = 0.0;
      for (std::uint64_t j = 0; j < dim; ++j) {
        const double w = std::norm(amps_[j]);
        acc += (std::popcount(j & z) & 1) ? -w : w;
      }
      return acc;
    }
    const cplx w = ipow(static_cast<unsigned>(p.y_count()));
    cplx acc = 0.0;
    for (std::uint64_t j = 0; j < dim; ++j) {
      const double sgn = (std::popcount(j & z) & 1) ? -1.0 : 1.0;
      acc += std::conj(amps_[j ^ x]) * (sgn * amps_[j]);
    }
    acc *= w;
    if (std::abs(acc.imag()) > 1e-10) throw std::runtime_error("expectation: non-real result");
    return acc.real();
  }

 private:
  std::uint64_t bit_of(std::size_t q) const { return std::uint64_t{1} << (n_ - 1 - q); }

  // Bit b of (j & (j >> 1)) is set iff bits b and b+1 of j are set; adjacent pairs only.
  std::uint64_t pair_mask(std::size_t a, std::size_t b) const {
    if (b != a + 1 && a != b + 1) throw std::invalid_argument("cz_brick: only adjacent pairs supported");
    return bit_of(std::max(a, b));
  }

  void require_same(const StateVector& o) const {
    if (o.n_ != n_) throw std::invalid_argument("StateVector: size mismatch");
  }

  void check_op(const PauliString& p, const char* what) const {
    if (p.n_sites() != n_) throw std::invalid_argument(std::string(what) + ": size mismatch");
  }

  std::size_t n_ = 0;
  std::vector<cplx> amps_;
};

inline StateVector init_state(std::size_t n, InitKind kind) {
  StateVector v(n);
  v.reset(kind);
  return v;
}

inline StateVector apply_pauli(const PauliString& p, const StateVector& v) {
  StateVector out(v.n_qubits());
  if (p.n_sites() != v.n_qubits()) throw std::invalid_argument("apply_pauli: size mismatch");
  apply_pauli_into(p, v.amplitudes(), out.amplitudes());
  return out;
}

inline StateVector apply_rotation(StateVector v, const PauliString& p, double theta) {
  v.rotate(p, theta);
  return v;
}

inline StateVector apply_entangler(StateVector v, const EntanglerPattern& pattern) {
  v.entangle(pattern);
  return v;
}

inline double expectation(const StateVector& v, const PauliString& o) { return v.expectation(o); }

}  // namespace plateau
