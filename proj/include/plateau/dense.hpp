#pragma once

// Small dense operators for exact oracles (m <= 8 qubits).
//
// Same qubit convention as pauli.hpp: qubit 0 is the most significant index bit.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "plateau/pauli.hpp"

namespace plateau {

using Matrix = Eigen::MatrixXcd;

inline constexpr std::size_t kMaxDenseQubits = 8;

/// Contiguous qubit range [offset, offset + width) acted on by one rotation block.
struct BlockSupport {
  std::size_t offset = 0;
  std::size_t width = 1;

  /// Amplitude-bit mask of the block on an n-qubit register.
  std::uint64_t bits(std::size_t n) const {
    if (width == 0 || offset + width > n) throw std::out_of_range("BlockSupport: block exceeds register");
    std::uint64_t m = 0;
    for (std::size_t q = offset; q < offset + width; ++q) m |= std::uint64_t{1} << (n - 1 - q);
    return m;
  }
};

class DenseOperator {
 public:
  DenseOperator() = default;

  explicit DenseOperator(Matrix m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols()) throw std::invalid_argument("DenseOperator: matrix must be square");
    const auto dim = static_cast<std::uint64_t>(m_.rows());
    if (dim == 0 || !std::has_single_bit(dim)) throw std::invalid_argument("DenseOperator: dim must be a power of two");
    n_ = static_cast<std::size_t>(std::countr_zero(dim));
    if (n_ > kMaxDenseQubits) throw std::domain_error("DenseOperator: more than 8 qubits");
  }

  static DenseOperator identity(std::size_t n) { return DenseOperator(Matrix::Identity(dim_of(n), dim_of(n))); }
  static DenseOperator zero(std::size_t n) { return DenseOperator(Matrix::Zero(dim_of(n), dim_of(n))); }

  static DenseOperator from_pauli(const PauliString& p) {
    if (p.n_sites() > kMaxDenseQubits) throw std::domain_error("DenseOperator: more than 8 qubits");
    const std::size_t dim = std::size_t{1} << p.n_sites();
    Matrix m = Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    const cplx w = ipow(p.phase_exp() + static_cast<unsigned>(p.y_count()));
    for (std::uint64_t j = 0; j < dim; ++j) {
      const double sgn = (std::popcount(j & p.z_bits()) & 1) ? -1.0 : 1.0;
      m(static_cast<Eigen::Index>(j ^ p.x_bits()), static_cast<Eigen::Index>(j)) = w * sgn;
    }
    return DenseOperator(std::move(m));
  }

  std::size_t n_qubits() const { return n_; }
  std::size_t dim() const { return static_cast<std::size_t>(m_.rows()); }
  const Matrix& matrix() const { return m_; }
  Matrix& matrix() { return m_; }

  cplx trace() const { return m_.trace(); }

  bool is_hermitian(double tol = 1e-12) const { return max_abs_diff(m_, m_.adjoint()) <= tol; }

  DenseOperator adjoint() const { return DenseOperator(m_.adjoint()); }

  friend DenseOperator operator*(const DenseOperator& a, const DenseOperator& b) {
    require_same_dim(a, b);
    return DenseOperator(a.m_ * b.m_);
  }
  friend DenseOperator operator+(const DenseOperator& a, const DenseOperator& b) {
    require_same_dim(a, b);
    return DenseOperator(a.m_ + b.m_);
  }
  friend DenseOperator operator-(const DenseOperator& a, const DenseOperator& b) {
    require_same_dim(a, b);
    return DenseOperator(a.m_ - b.m_);
  }
  friend DenseOperator operator*(cplx c, const DenseOperator& a) { return DenseOperator(c * a.m_); }
  friend DenseOperator operator*(double c, const DenseOperator& a) { return DenseOperator(c * a.m_); }

  DenseOperator& operator+=(const DenseOperator& b) {
    require_same_dim(*this, b);
    m_ += b.m_;
    return *this;
  }

  static double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("max_abs_diff: shape mismatch");
    return (a - b).cwiseAbs().maxCoeff();
  }

  friend double max_abs_diff(const DenseOperator& a, const DenseOperator& b) { return max_abs_diff(a.m_, b.m_); }

 private:
  static Eigen::Index dim_of(std::size_t n) {
    if (n == 0 || n > kMaxDenseQubits) throw std::domain_error("DenseOperator: qubit count must be in [1, 8]");
    return static_cast<Eigen::Index>(std::size_t{1} << n);
  }
  static void require_same_dim(const DenseOperator& a, const DenseOperator& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("DenseOperator: dimension mismatch");
  }

  Matrix m_;
  std::size_t n_ = 0;
};

/// Tr over the qubits in `traced_bits`, then tensored back with the identity on
/// those same qubits: the operator Tr_sigma(A) (x) I_sigma kept in place.
inline DenseOperator trace_replace(const DenseOperator& a, std::uint64_t traced_bits) {
  const std::uint64_t dim = a.dim();
  if (traced_bits >= dim) throw std::out_of_range("trace_replace: traced qubits beyond register");
  const Matrix& m = a.matrix();
  Matrix out = Matrix::Zero(m.rows(), m.cols());
  if (traced_bits == 0) return a;
  // Enumerate submasks of traced_bits for the summed index.
  std::vector<std::uint64_t> sub;
  for (std::uint64_t t = traced_bits;; t = (t - 1) & traced_bits) {
    sub.push_back(t);
    if (t == 0) break;
  }
  for (std::uint64_t r = 0; r < dim; ++r) {
    if (r & traced_bits) continue;
    for (std::uint64_t c = 0; c < dim; ++c) {
      if (c & traced_bits) continue;
      cplx acc = 0;
      for (std::uint64_t t : sub) acc += m(static_cast<Eigen::Index>(r | t), static_cast<Eigen::Index>(c | t));
      for (std::uint64_t t : sub) out(static_cast<Eigen::Index>(r | t), static_cast<Eigen::Index>(c | t)) = acc;
    }
  }
  return DenseOperator(std::move(out));
}

/// Reduced operator on the qubits NOT in `traced_bits` (kept qubits retain their relative order).
inline DenseOperator partial_trace(const DenseOperator& a, std::uint64_t traced_bits) {
  const std::uint64_t dim = a.dim();
  if (traced_bits >= dim) throw std::out_of_range("partial_trace: traced qubits beyond register");
  const std::uint64_t kept_bits = (dim - 1) & ~traced_bits;
  const auto kept = static_cast<std::size_t>(std::popcount(kept_bits));
  if (kept == 0) throw std::invalid_argument("partial_trace: cannot trace out every qubit into an operator");
  // Scatter a compact index into the kept bit positions.
  auto expand = [kept_bits](std::uint64_t compact) {
    std::uint64_t out = 0;
    std::uint64_t bits = kept_bits;
    for (std::uint64_t i = 0; bits != 0; ++i) {
      const std::uint64_t low = bits & (~bits + 1);
      if (compact & (std::uint64_t{1} << i)) out |= low;
      bits &= bits - 1;
    }
    return out;
  };
  const std::uint64_t rdim = std::uint64_t{1} << kept;
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(rdim), static_cast<Eigen::Index>(rdim));
  const Matrix& m = a.matrix();
  for (std::uint64_t r = 0; r < rdim; ++r) {
    const std::uint64_t rf = expand(r);
    for (std::uint64_t c = 0; c < rdim; ++c) {
      const std::uint64_t cf = expand(c);
      cplx acc = 0;
      for (std::uint64_t t = traced_bits;; t = (t - 1) & traced_bits) {
        acc += m(static_cast<Eigen::Index>(rf | t), static_cast<Eigen::Index>(cf | t));
        if (t == 0) break;
      }
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = acc;
    }
  }
  return DenseOperator(std::move(out));
}

/// All 4^width Pauli strings supported on `block` of an n-qubit register (identity first).
inline std::vector<PauliString> block_paulis(std::size_t n, const BlockSupport& block) {
  const std::uint64_t mask = block.bits(n);
  std::vector<PauliString> out;
  out.reserve(std::size_t{1} << (2 * block.width));
  for (std::uint64_t x = mask;; x = (x - 1) & mask) {
    for (std::uint64_t z = mask;; z = (z - 1) & mask) {
      out.emplace_back(n, x, z);
      if (z == 0) break;
    }
    if (x == 0) break;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

namespace detail {

inline void require_twirl_size(const DenseOperator& a, std::size_t cap, const char* what) {
  if (a.n_qubits() > cap) throw std::domain_error(std::string(what) + ": operator too large for enumeration");
}

}  // namespace detail

/// sum_P P a P over all 4^s Paulis on the block, by explicit enumeration.
inline DenseOperator twirl_sum(const DenseOperator& a, const BlockSupport& block) {
  detail::require_twirl_size(a, kMaxDenseQubits, "twirl_sum");
  const std::size_t n = a.n_qubits();
  DenseOperator acc = DenseOperator::zero(n);
  for (const auto& p : block_paulis(n, block)) {
    const DenseOperator pm = DenseOperator::from_pauli(p);
    acc += pm * a * pm;
  }
  return acc;
}

/// Closed form of the single-block twirl: 2^s Tr_s(a) (x) I_s.
inline DenseOperator twirl_closed_form(const DenseOperator& a, const BlockSupport& block) {
  return static_cast<double>(std::uint64_t{1} << block.width) * trace_replace(a, block.bits(a.n_qubits()));
}

struct TwirlSecondResult {
  DenseOperator main;       // 2^s Tr_s(a c) (x) I_s * b
  DenseOperator remainder;  // enumerated sum minus main
};

/// sum_P P a P b P c P split into its partial-trace main term and a traceless remainder.
inline TwirlSecondResult twirl_sum_second(const DenseOperator& a, const DenseOperator& b, const DenseOperator& c,
                                          const BlockSupport& block) {
  detail::require_twirl_size(a, 6, "twirl_sum_second");
  if (a.dim() != b.dim() || a.dim() != c.dim()) throw std::invalid_argument("twirl_sum_second: dimension mismatch");
  const std::size_t n = a.n_qubits();
  DenseOperator sum = DenseOperator::zero(n);
  for (const auto& p : block_paulis(n, block)) {
    const DenseOperator pm = DenseOperator::from_pauli(p);
    sum += pm * a * pm * b * pm * c * pm;
  }
  DenseOperator main = twirl_closed_form(a * c, block) * b;
  DenseOperator rem = sum - main;
  return {std::move(main), std::move(rem)};
}

}  // namespace plateau
