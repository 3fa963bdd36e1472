#pragma once

// Averaged moment maps of the random ansatz, the F/G constants and the
// closed-form variance predictors.

#include <boost/rational.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "plateau/circuit.hpp"
#include "plateau/dense.hpp"
#include "plateau/program.hpp"

namespace plateau {

using Rational = boost::rational<std::int64_t>;

inline double to_double(const Rational& r) { return boost::rational_cast<double>(r); }

inline Rational rpow(Rational base, std::size_t e) {
  Rational out(1);
  for (std::size_t i = 0; i < e; ++i) out *= base;
  return out;
}

// ---------------------------------------------------------------------------
// Angle moments

/// E[cos^a(theta/2) sin^b(theta/2)] for theta uniform on [0, 2pi).
/// Odd cos powers vanish; an odd sin power with even cos power is irrational and rejected.
inline Rational trig_moment(unsigned cos_power, unsigned sin_power) {
  if (cos_power % 2 == 1) return Rational(0);
  if (sin_power % 2 == 1) throw std::domain_error("trig_moment: odd sine power with even cosine power is not rational");
  // Beta integral: (a-1)!! (b-1)!! / (a+b)!!
  auto dfact = [](unsigned k) {
    std::int64_t r = 1;
    for (unsigned i = k; i > 1; i -= 2) r *= i;
    return r;
  };
  const std::int64_t num = (cos_power ? dfact(cos_power - 1) : 1) * (sin_power ? dfact(sin_power - 1) : 1);
  return Rational(num, dfact(cos_power + sin_power));
}

// ---------------------------------------------------------------------------
// Table constants

struct FGEntry {
  std::size_t s = 0;
  Rational F;
  Rational G;
};

/// F = (1/(4s)) (5/12)^(s-1).
inline Rational f_closed_form(std::size_t s) {
  if (s == 0) throw std::invalid_argument("f_closed_form: s must be positive");
  return Rational(1, static_cast<std::int64_t>(4 * s)) * rpow(Rational(5, 12), s - 1);
}

inline FGEntry fg_lookup(std::size_t s) {
  switch (s) {
    case 1: return {1, Rational(1, 4), Rational(5, 12)};
    case 2: return {2, Rational(5, 96), Rational(1, 3)};
    case 3: return {3, Rational(25, 1728), Rational(17, 126)};
    case 4: return {4, Rational(125, 27648), Rational(37, 510)};
    default: throw std::out_of_range("fg_lookup: table covers s in {1,2,3,4} only, got s = " + std::to_string(s));
  }
}

// ---------------------------------------------------------------------------
// Variance predictors

enum class PrefactorMode { eq14, figure1 };

inline std::string_view to_string(PrefactorMode m) { return m == PrefactorMode::eq14 ? "eq14" : "figure1"; }

inline PrefactorMode parse_prefactor_mode(std::string_view s) {
  if (s == "eq14") return PrefactorMode::eq14;
  if (s == "figure1") return PrefactorMode::figure1;
  throw std::invalid_argument("unknown prefactor mode '" + std::string(s) + "'");
}

/// eq14: (s N/n) F G^(N-1). figure1 carries the extra factor s of the closed forms
/// quoted for N = n/s, e.g. 5/48 (1/3)^(n/2-1) at s = 2.
inline double predict_single_layer_variance(std::size_t n, std::size_t s, std::size_t n_eff, PrefactorMode mode) {
  const FGEntry fg = fg_lookup(s);
  if (n == 0) throw std::invalid_argument("predict_single_layer_variance: n must be positive");
  if (n_eff == 0) return 0.0;
  // Powers of G leave int64 range quickly, so only the constants stay exact.
  const double pre = static_cast<double>(s * n_eff) / static_cast<double>(n);
  const double v = pre * to_double(fg.F) * std::pow(to_double(fg.G), static_cast<double>(n_eff - 1));
  return mode == PrefactorMode::figure1 ? static_cast<double>(s) * v : v;
}

/// c0 (9/32)^n s N/(n l).
inline double predict_deep_variance(std::size_t n, std::size_t s, std::size_t n_eff, std::size_t l, double c0) {
  if (l == 0 || n == 0) throw std::invalid_argument("predict_deep_variance: n and l must be positive");
  return c0 * std::pow(9.0 / 32.0, static_cast<double>(n)) * static_cast<double>(s * n_eff) /
         static_cast<double>(n * l);
}

// ---------------------------------------------------------------------------
// Single-gate averaged maps

namespace detail {

inline void require_qubits(const DenseOperator& a, std::size_t cap, const char* what) {
  if (a.n_qubits() > cap) throw std::domain_error(std::string(what) + ": at most " + std::to_string(cap) + " qubits");
}

inline std::vector<DenseOperator> policy_matrices(std::size_t n, const BlockSupport& block, GeneratorPolicy policy) {
  std::vector<DenseOperator> out;
  for (const auto& p : generator_set(n, block, policy)) out.push_back(DenseOperator::from_pauli(p));
  return out;
}

}  // namespace detail

/// E over (theta, P) of U^dag a U for one rotation: a/2 + (1/(2|P|)) sum_P P a P.
inline DenseOperator single_gate_first_moment(const DenseOperator& a, const BlockSupport& block,
                                              GeneratorPolicy policy) {
  detail::require_qubits(a, 6, "single_gate_first_moment");
  const auto ps = detail::policy_matrices(a.n_qubits(), block, policy);
  const double c2 = to_double(trig_moment(2, 0));
  const double s2 = to_double(trig_moment(0, 2));
  DenseOperator acc = DenseOperator::zero(a.n_qubits());
  for (const auto& p : ps) acc += p * a * p;
  return c2 * a + (s2 / static_cast<double>(ps.size())) * acc;
}

/// E over (theta, P) of U^dag a U b U^dag c U for one rotation.
inline DenseOperator single_gate_second_moment(const DenseOperator& a, const DenseOperator& b, const DenseOperator& c,
                                               const BlockSupport& block, GeneratorPolicy policy) {
  detail::require_qubits(a, 5, "single_gate_second_moment");
  const auto ps = detail::policy_matrices(a.n_qubits(), block, policy);
  const double c4 = to_double(trig_moment(4, 0));
  const double s4 = to_double(trig_moment(0, 4));
  const double c2s2 = to_double(trig_moment(2, 2));
  DenseOperator quartic = DenseOperator::zero(a.n_qubits());
  DenseOperator mixed = DenseOperator::zero(a.n_qubits());
  for (const auto& p : ps) {
    const DenseOperator pap = p * a * p;
    const DenseOperator pcp = p * c * p;
    quartic += pap * b * pcp;
    mixed += pap * b * c + a * b * pcp + a * p * b * p * c + p * a * b * c * p - p * a * b * p * c - a * p * b * c * p;
  }
  const double m = static_cast<double>(ps.size());
  return c4 * (a * b * c) + (s4 / m) * quartic + (c2s2 / m) * mixed;
}

// ---------------------------------------------------------------------------
// Circuit-level oracles

/// Exact E[U^dag a U] by composing the single-gate maps in Heisenberg order:
/// last layer first, entangler conjugation, then that layer's rotations.
inline DenseOperator exact_twirl_first_moment(const DenseOperator& a, const CircuitSpec& spec) {
  spec.validate();
  detail::require_qubits(a, 6, "exact_twirl_first_moment");
  if (a.n_qubits() != spec.n) throw std::invalid_argument("exact_twirl_first_moment: size mismatch");
  const DenseOperator w = entangler_matrix(spec.entangler_pattern());
  const DenseOperator wd = w.adjoint();
  DenseOperator cur = a;
  for (std::size_t layer = spec.l; layer-- > 0;) {
    cur = wd * cur * w;
    for (std::size_t b = 0; b < spec.blocks_per_layer(); ++b) {
      const std::size_t slot = layer * spec.blocks_per_layer() + b;
      if (spec.is_active(slot)) cur = single_gate_first_moment(cur, spec.block_of(slot), spec.generator_policy);
    }
  }
  return cur;
}

/// Exact E[U^dag a U b U^dag c U] by enumerating every generator choice and a
/// 3-point equispaced angle rule per slot (exact for the degree-2 angle dependence).
inline DenseOperator exact_twirl_second_moment(const DenseOperator& a, const DenseOperator& b, const DenseOperator& c,
                                               const CircuitSpec& spec, std::uint64_t max_terms = 4'000'000) {
  spec.validate();
  detail::require_qubits(a, 5, "exact_twirl_second_moment");
  if (a.n_qubits() != spec.n || b.dim() != a.dim() || c.dim() != a.dim()) {
    throw std::invalid_argument("exact_twirl_second_moment: size mismatch");
  }
  constexpr std::size_t kAngles = 3;
  const auto slots = spec.active_slots();
  std::vector<std::vector<DenseOperator>> gates(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    for (const auto& p : generator_set(spec.n, spec.block_of(slots[i]), spec.generator_policy)) {
      for (std::size_t t = 0; t < kAngles; ++t) {
        gates[i].push_back(rotation_matrix(p, 2.0 * std::numbers::pi * static_cast<double>(t) / kAngles));
      }
    }
  }
  double terms = 1.0;
  for (const auto& g : gates) terms *= static_cast<double>(g.size());
  if (terms > static_cast<double>(max_terms)) throw std::domain_error("exact_twirl_second_moment: too many terms");

  const DenseOperator w = entangler_matrix(spec.entangler_pattern());
  DenseOperator acc = DenseOperator::zero(spec.n);
  std::vector<std::size_t> idx(slots.size(), 0);
  for (;;) {
    DenseOperator u = DenseOperator::identity(spec.n);
    std::size_t i = 0;
    for (std::size_t layer = 0; layer < spec.l; ++layer) {
      for (; i < slots.size() && spec.layer_of(slots[i]) == layer; ++i) u = gates[i][idx[i]] * u;
      if (spec.entangler != EntanglerKind::none) u = w * u;
    }
    const DenseOperator ud = u.adjoint();
    acc += ud * a * u * b * ud * c * u;
    std::size_t d = 0;
    while (d < idx.size() && ++idx[d] == gates[d].size()) idx[d++] = 0;
    if (d == idx.size()) break;
  }
  return (1.0 / terms) * acc;
}

enum class Normalization { as_written, block_normalized };

inline std::string_view to_string(Normalization m) {
  return m == Normalization::as_written ? "as_written" : "block_normalized";
}

namespace detail {

inline std::uint64_t subset_bits(const CircuitSpec& spec, std::uint64_t sigma) {
  std::uint64_t bits = 0;
  for (std::size_t b = 0; b < spec.blocks_per_layer(); ++b) {
    if (sigma >> b & 1) bits |= BlockSupport{b * spec.s, spec.s}.bits(spec.n);
  }
  return bits;
}

inline void require_subset_size(const CircuitSpec& spec) {
  if (spec.blocks_per_layer() > 12) throw std::domain_error("subset expansion: at most 12 blocks");
}

}  // namespace detail

/// Subset expansion of E[U^dag A U]:
/// pre * sum_sigma (2^(-n/s) 3^|sigma|)^(l-1) 2^(-s|sigma|) Tr_sigma(A) (x) I,
/// with pre = (1/2)^n (as_written) or (1/2)^(n/s) (block_normalized).
inline DenseOperator circuit_first_moment_eq12(const DenseOperator& a, const CircuitSpec& spec, Normalization norm) {
  spec.validate();
  detail::require_qubits(a, 6, "circuit_first_moment_eq12");
  detail::require_subset_size(spec);
  if (a.n_qubits() != spec.n) throw std::invalid_argument("circuit_first_moment_eq12: size mismatch");
  const std::size_t nb = spec.blocks_per_layer();
  const double pre = std::pow(0.5, static_cast<double>(norm == Normalization::as_written ? spec.n : nb));
  DenseOperator acc = DenseOperator::zero(spec.n);
  for (std::uint64_t sigma = 0; sigma < (std::uint64_t{1} << nb); ++sigma) {
    const auto k = static_cast<double>(std::popcount(sigma));
    const double wgt = std::pow(std::pow(2.0, -static_cast<double>(nb)) * std::pow(3.0, k),
                                static_cast<double>(spec.l - 1)) *
                       std::pow(2.0, -static_cast<double>(spec.s) * k);
    acc += wgt * trace_replace(a, detail::subset_bits(spec, sigma));
  }
  return pre * acc;
}

/// Leading term of E[U^dag A U B U^dag C U]:
/// (3/8)^(n/s) sum_sigma (8^(-m) 3^(|sigma|+n/s))^(l-1) 2^(-s|sigma|) (Tr_sigma(AC) (x) I) B,
/// with m = n (as_written) or m = n/s (block_normalized).
inline DenseOperator circuit_second_moment_eq13(const DenseOperator& a, const DenseOperator& b, const DenseOperator& c,
                                                const CircuitSpec& spec, Normalization norm) {
  spec.validate();
  detail::require_qubits(a, 5, "circuit_second_moment_eq13");
  detail::require_subset_size(spec);
  if (a.n_qubits() != spec.n || b.dim() != a.dim() || c.dim() != a.dim()) {
    throw std::invalid_argument("circuit_second_moment_eq13: size mismatch");
  }
  const std::size_t nb = spec.blocks_per_layer();
  const double m = static_cast<double>(norm == Normalization::as_written ? spec.n : nb);
  const DenseOperator ac = a * c;
  DenseOperator acc = DenseOperator::zero(spec.n);
  for (std::uint64_t sigma = 0; sigma < (std::uint64_t{1} << nb); ++sigma) {
    const auto k = static_cast<double>(std::popcount(sigma));
    const double wgt = std::pow(std::pow(8.0, -m) * std::pow(3.0, k + static_cast<double>(nb)),
                                static_cast<double>(spec.l - 1)) *
                       std::pow(2.0, -static_cast<double>(spec.s) * k);
    acc += wgt * (trace_replace(ac, detail::subset_bits(spec, sigma)) * b);
  }
  return std::pow(3.0 / 8.0, static_cast<double>(nb)) * acc;
}

/// Remainder floor for comparisons against the truncated expansion: max(atol, kappa 8^-n).
inline double eq13_tolerance_floor(std::size_t n, double atol, double kappa = 10.0) {
  return std::max(atol, kappa * std::pow(8.0, -static_cast<double>(n)));
}

}  // namespace plateau
