#pragma once

// Cross-module invariant suites behind `plateau verify`.

#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "plateau/analytics.hpp"
#include "plateau/calibration.hpp"
#include "plateau/circuit.hpp"
#include "plateau/dense.hpp"
#include "plateau/estimator.hpp"
#include "plateau/experiments.hpp"
#include "plateau/gradient.hpp"
#include "plateau/io.hpp"

namespace plateau {

enum class VerifyLevel { fast, full };

inline VerifyLevel parse_verify_level(std::string_view s) {
  if (s == "fast") return VerifyLevel::fast;
  if (s == "full") return VerifyLevel::full;
  throw std::invalid_argument("unknown verify level '" + std::string(s) + "' (expected fast or full)");
}

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

// ---------------------------------------------------------------------------
// Random inputs

inline DenseOperator random_hermitian_operator(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  const auto dim = static_cast<Eigen::Index>(std::size_t{1} << n);
  Matrix m(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) m(i, j) = cplx(g(rng), g(rng));
  }
  return DenseOperator(Matrix(0.5 * (m + m.adjoint())));
}

/// Random spec with n in [1, max_n], s from `widths` dividing n, l in [1, 3],
/// random entangler, policy and init, and roughly a quarter of slots pruned.
inline CircuitSpec random_spec(std::mt19937_64& rng, std::size_t max_n, const std::vector<std::size_t>& widths,
                               bool prune_some = true) {
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  for (std::size_t n = 1; n <= max_n; ++n) {
    for (std::size_t s : widths) {
      if (n % s == 0) shapes.push_back({n, s});
    }
  }
  const auto [n, s] = shapes[std::uniform_int_distribution<std::size_t>(0, shapes.size() - 1)(rng)];
  const std::size_t l = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
  const auto ent = static_cast<EntanglerKind>(std::uniform_int_distribution<int>(0, 2)(rng));
  auto pol = static_cast<GeneratorPolicy>(std::uniform_int_distribution<int>(0, 2)(rng));
  if (pol == GeneratorPolicy::xyz_only && s != 1) pol = GeneratorPolicy::full;
  const auto init = static_cast<InitKind>(std::uniform_int_distribution<int>(0, 1)(rng));
  CircuitSpec spec = CircuitSpec::make(n, l, s, ent, pol, init);
  if (prune_some && spec.slot_count() > 1) {
    RandomStream ps(rng(), 0);
    spec = prune(spec, 0.25, ps);
  }
  return spec;
}

inline PauliString random_observable(std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, 3);
  PauliString p(n);
  while (p.is_identity()) {
    for (std::size_t q = 0; q < n; ++q) p.set(q, static_cast<Letter>(pick(rng)));
  }
  return p;
}

/// The five-by-three-block example: n = 6, l = 3, s = 2, CZ brick, Z on qubit 0.
inline CircuitSpec fig5_spec() { return CircuitSpec::make(6, 3, 2, EntanglerKind::cz_brick); }
inline PauliString fig5_observable() { return PauliString::single(6, 0, Letter::Z); }

// ---------------------------------------------------------------------------
// Shared measurements (also used by the acceptance tests)

struct TwirlStats {
  double first_max = 0.0;   // max entrywise |twirl_sum - closed form|
  double trace_max = 0.0;   // max |Tr remainder| with a = c
};

inline TwirlStats twirl_identity_stats(std::size_t inputs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TwirlStats st;
  for (std::size_t i = 0; i < inputs; ++i) {
    const std::size_t n = 1 + i % 4;
    for (std::size_t s : {1u, 2u}) {
      if (s > n) continue;
      const std::size_t start = std::uniform_int_distribution<std::size_t>(0, n - s)(rng);
      const BlockSupport block{start, s};
      const DenseOperator a = random_hermitian_operator(n, rng);
      const DenseOperator b = random_hermitian_operator(n, rng);
      st.first_max = std::max(st.first_max, max_abs_diff(twirl_sum(a, block), twirl_closed_form(a, block)));
      const auto sec = twirl_sum_second(a, b, a, block);
      st.trace_max = std::max(st.trace_max, std::abs(sec.remainder.trace()));
    }
  }
  return st;
}

struct GradientAgreement {
  double commutator_max = 0.0;
  double finite_difference_max = 0.0;
  double kernel_max = 0.0;  // cone/component kernel vs parameter shift
  std::size_t triples = 0;
};

inline GradientAgreement gradient_agreement(std::size_t triples, std::size_t max_n,
                                            const std::vector<std::size_t>& widths, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GradientAgreement g;
  while (g.triples < triples) {
    auto spec = std::make_shared<const CircuitSpec>(random_spec(rng, max_n, widths));
    const auto slots = spec->active_slots();
    if (slots.empty()) continue;
    RandomStream rs(seed, g.triples);
    const CircuitInstance inst = sample_instance(spec, rs);
    const PauliString obs = random_observable(spec->n, rng);
    const std::size_t k = slots[std::uniform_int_distribution<std::size_t>(0, slots.size() - 1)(rng)];
    const double ps = grad_parameter_shift(inst, obs, k);
    g.commutator_max = std::max(g.commutator_max, std::abs(ps - grad_commutator(inst, obs, k)));
    g.finite_difference_max = std::max(g.finite_difference_max, std::abs(ps - grad_finite_difference(inst, obs, k, 1e-4)));
    const GradientKernel kernel(spec, obs);
    g.kernel_max = std::max(g.kernel_max, std::abs(ps - kernel.gradient(inst, k)));
    ++g.triples;
  }
  return g;
}

struct LightConeResult {
  std::vector<std::size_t> effective;
  double ineffective_max = 0.0;  // max |gradient| over ineffective slots
  std::size_t samples = 0;
};

inline LightConeResult fig5_light_cone(std::size_t samples, std::uint64_t seed) {
  LightConeResult r;
  const auto spec = std::make_shared<const CircuitSpec>(fig5_spec());
  const PauliString obs = fig5_observable();
  r.effective = effective_parameters(*spec, obs);
  for (std::size_t i = 0; i < samples; ++i) {
    RandomStream rs(seed, i);
    const CircuitInstance inst = sample_instance(spec, rs);
    for (std::size_t k = 0; k < spec->slot_count(); ++k) {
      if (std::find(r.effective.begin(), r.effective.end(), k) != r.effective.end()) continue;
      r.ineffective_max = std::max(r.ineffective_max, std::abs(grad_parameter_shift(inst, obs, k)));
    }
  }
  r.samples = samples;
  return r;
}

struct Eq12Resolution {
  double unitality_max = 0.0;
  double as_written_max = 0.0;
  double block_normalized_max = 0.0;
  std::vector<std::string> failures;  // grid points where the better mode misses 1e-10
};

/// Grid n <= 4, s in {1, 2}, l in {1, 2, 3}, no entangler, policy full.
inline Eq12Resolution eq12_resolution(std::uint64_t seed, const std::vector<std::size_t>& layers = {1, 2, 3}) {
  std::mt19937_64 rng(seed);
  Eq12Resolution r;
  for (std::size_t n = 1; n <= 4; ++n) {
    for (std::size_t s : {1u, 2u}) {
      if (n % s) continue;
      for (std::size_t l : layers) {
        const CircuitSpec spec = CircuitSpec::make(n, l, s, EntanglerKind::none, GeneratorPolicy::full);
        const DenseOperator id = DenseOperator::identity(n);
        r.unitality_max = std::max(r.unitality_max, max_abs_diff(exact_twirl_first_moment(id, spec), id));
        const DenseOperator a = random_hermitian_operator(n, rng);
        const DenseOperator exact = exact_twirl_first_moment(a, spec);
        const double w = max_abs_diff(circuit_first_moment_eq12(a, spec, Normalization::as_written), exact);
        const double b = max_abs_diff(circuit_first_moment_eq12(a, spec, Normalization::block_normalized), exact);
        r.as_written_max = std::max(r.as_written_max, w);
        r.block_normalized_max = std::max(r.block_normalized_max, b);
        if (std::min(w, b) > 1e-10) {
          std::ostringstream os;
          os << "n=" << n << " s=" << s << " l=" << l << " (as_written " << w << ", block_normalized " << b << ")";
          r.failures.push_back(os.str());
        }
      }
    }
  }
  return r;
}

struct Eq13Comparison {
  std::string label;
  double max_excess = 0.0;  // max entrywise |lead - mc| - max(5 se, floor), <= 0 means agreement
  double max_abs_diff = 0.0;
  double floor = 0.0;
};

/// Leading term vs the Monte Carlo second moment with a = c = Z on every qubit,
/// b = |0..0><0..0|, no entangler, policy full.
inline Eq13Comparison eq13_vs_mc(std::size_t n, std::size_t l, std::size_t samples, std::uint64_t seed,
                                 std::size_t workers) {
  const CircuitSpec spec = CircuitSpec::make(n, l, 1, EntanglerKind::none, GeneratorPolicy::full);
  const DenseOperator z = DenseOperator::from_pauli(global_z(n));
  Matrix rho = Matrix::Zero(z.dim(), z.dim());
  rho(0, 0) = 1.0;
  const DenseOperator b(rho);
  const DenseOperator lead = circuit_second_moment_eq13(z, b, z, spec, Normalization::as_written);
  const OperatorEstimate mc = mc_second_moment(z, b, z, spec, samples, seed, workers);
  Eq13Comparison c;
  c.label = "n=" + std::to_string(n) + " l=" + std::to_string(l);
  c.floor = eq13_tolerance_floor(n, 0.0);
  c.max_excess = -std::numeric_limits<double>::infinity();
  const Matrix d = lead.matrix() - mc.mean.matrix();
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      const double tol = std::max(5.0 * mc.stderr_(i, j), c.floor);
      c.max_excess = std::max(c.max_excess, std::abs(d(i, j)) - tol);
      c.max_abs_diff = std::max(c.max_abs_diff, std::abs(d(i, j)));
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Suite

namespace detail {

inline CheckResult timed(const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
  CheckResult r;
  r.name = name;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    auto [ok, detail] = body();
    r.passed = ok;
    r.detail = detail;
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << v;
  return os.str();
}

}  // namespace detail

inline std::vector<CheckResult> run_verify(VerifyLevel level, std::uint64_t seed = 1, std::size_t workers = 1) {
  using detail::fmt;
  using detail::timed;
  const bool full = level == VerifyLevel::full;
  std::vector<CheckResult> out;

  out.push_back(timed("twirl.identities", [&] {
    const auto st = twirl_identity_stats(full ? 100 : 20, seed);
    return std::pair{st.first_max <= 1e-12 && st.trace_max <= 1e-10,
                     "first-moment max " + fmt(st.first_max) + ", |Tr remainder| max " + fmt(st.trace_max)};
  }));

  out.push_back(timed("gradient.three_way", [&] {
    const auto g = gradient_agreement(full ? 200 : 40, full ? 8 : 6, {1, 2, 3}, seed);
    const bool ok = g.commutator_max <= 1e-10 && g.finite_difference_max <= 1e-6 && g.kernel_max <= 1e-10;
    return std::pair{ok, std::to_string(g.triples) + " triples; commutator " + fmt(g.commutator_max) +
                             ", finite difference " + fmt(g.finite_difference_max) + ", light-cone kernel " +
                             fmt(g.kernel_max)};
  }));

  out.push_back(timed("light_cone.example", [&] {
    const auto r = fig5_light_cone(full ? 100 : 20, seed);
    const bool ok = r.effective == std::vector<std::size_t>{0, 1, 2, 3, 4, 6} && r.ineffective_max <= 1e-12;
    std::string eff;
    for (auto k : r.effective) eff += (eff.empty() ? "" : ",") + std::to_string(k);
    return std::pair{ok, "effective {" + eff + "}, ineffective |grad| max " + fmt(r.ineffective_max)};
  }));

  out.push_back(timed("twirl.unitality_and_subset_expansion", [&] {
    // Fast level covers the depths where the subset expansion is exact.
    const auto r = full ? eq12_resolution(seed) : eq12_resolution(seed, {1, 2});
    const bool ok = r.unitality_max <= 1e-12 && r.failures.empty();
    std::string d = "unitality " + fmt(r.unitality_max) + ", as_written " + fmt(r.as_written_max) +
                    ", block_normalized " + fmt(r.block_normalized_max);
    if (!r.failures.empty()) d += "; no mode within 1e-10 at " + r.failures.front();
    return std::pair{ok, d};
  }));

  out.push_back(timed("estimator.determinism", [&] {
    const auto spec = std::make_shared<const CircuitSpec>(CircuitSpec::make(4, 3, 1, EntanglerKind::cz_brick));
    const PauliString obs = global_z(4);
    const auto a = run_ensemble(spec, obs, KMode::random_effective(), 3000, seed, 1);
    const auto b = run_ensemble(spec, obs, KMode::random_effective(), 3000, seed, std::max<std::size_t>(workers, 3));
    const bool ok = a.variance == b.variance && a.mean == b.mean && a.ci_low == b.ci_low && a.ci_high == b.ci_high;
    return std::pair{ok, "variance " + format_double(a.variance) + " vs " + format_double(b.variance)};
  }));

  out.push_back(timed("estimator.mean_zero", [&] {
    const auto spec = std::make_shared<const CircuitSpec>(CircuitSpec::make(3, 2, 1, EntanglerKind::cx_brick));
    const auto e = run_ensemble(spec, global_z(3), KMode::random_effective(), full ? 100000 : 20000, seed, workers);
    const double z = std::abs(e.mean) / e.mean_stderr;
    return std::pair{z <= 4.0, "mean " + fmt(e.mean) + " = " + fmt(z) + " stderr"};
  }));

  out.push_back(timed("io.csv_round_trip", [&] {
    ExperimentConfig c;
    c.tag = "verify";
    c.n = 4;
    c.n_samples = 200;
    c.master_seed = seed;
    c.k_modes = {KMode::random_effective(), KMode::random_all()};
    c.sweep = SweepAxes{{}, {1, 2}, {1, 2}, {0.0, 0.5}, {}};
    const auto rows = run_sweep(c).rows;
    const std::string csv = to_csv(rows);
    const auto back = parse_csv(csv);
    return std::pair{back == rows && to_csv(back) == csv, std::to_string(rows.size()) + " rows"};
  }));

  if (full) {
    out.push_back(timed("mc.first_moment_vs_exact", [&] {
      std::mt19937_64 rng(seed);
      double worst = 0.0;
      for (auto e : {EntanglerKind::none, EntanglerKind::cz_brick, EntanglerKind::cx_brick}) {
        const CircuitSpec spec = CircuitSpec::make(2, 2, 1, e, GeneratorPolicy::full);
        const DenseOperator a = random_hermitian_operator(2, rng);
        const auto mc = mc_first_moment(a, spec, 50000, seed, workers);
        worst = std::max(worst, mc.max_z(exact_twirl_first_moment(a, spec), 1e-12));
      }
      return std::pair{worst <= 5.0, "max |z| " + fmt(worst)};
    }));

    out.push_back(timed("mc.second_moment_subset_expansion", [&] {
      double worst = -std::numeric_limits<double>::infinity();
      std::string where;
      for (std::size_t n : {1u, 2u}) {
        for (std::size_t l : {1u, 2u}) {
          const auto c = eq13_vs_mc(n, l, 200000, seed, workers);
          if (c.max_excess > worst) {
            worst = c.max_excess;
            where = c.label;
          }
        }
      }
      return std::pair{worst <= 0.0, "worst excess over tolerance " + fmt(worst) + " at " + where};
    }));

    out.push_back(timed("estimator.k_mode_scaling", [&] {
      CircuitSpec base = CircuitSpec::make(4, 4, 1, EntanglerKind::cz_brick);
      RandomStream ps(seed, kPruneStream);
      const auto spec = std::make_shared<const CircuitSpec>(prune(base, 0.5, ps));
      const PauliString obs = global_z(4);
      const auto eff = run_ensemble(spec, obs, KMode::random_effective(), 40000, seed, workers);
      const auto all = run_ensemble(spec, obs, KMode::random_all(), 40000, seed + 1, workers);
      const double ratio = static_cast<double>(eff.n_eff) / static_cast<double>(spec->slot_count());
      const double se = std::hypot(all.bootstrap_se, ratio * eff.bootstrap_se);
      const double diff = std::abs(all.variance - ratio * eff.variance);
      return std::pair{diff <= 3.0 * se, "|all - ratio*eff| = " + fmt(diff) + ", 3 se = " + fmt(3.0 * se)};
    }));
  }
  return out;
}

}  // namespace plateau
