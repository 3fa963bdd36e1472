#pragma once

// Monte Carlo estimation of gradient moments over the random circuit ensemble.
//
// Every sample i draws from its own RandomStream(master_seed, i) and results are
// reduced in fixed index order, so outputs do not depend on the worker count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <numbers>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "plateau/circuit.hpp"
#include "plateau/dense.hpp"
#include "plateau/gradient.hpp"
#include "plateau/program.hpp"
#include "plateau/random.hpp"

namespace plateau {

// ---------------------------------------------------------------------------
// Parallel plumbing

/// Runs fn(i) for i in [0, count) on `workers` threads. Blocks of indices are
/// handed out dynamically; callers must make fn(i) depend on i only.
inline void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn,
                         std::size_t grain = 64) {
  if (workers == 0) throw std::invalid_argument("parallel_for: workers must be positive");
  workers = std::min<std::size_t>(workers, (count + grain - 1) / std::max<std::size_t>(grain, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto body = [&] {
    try {
      for (;;) {
        const std::size_t begin = next.fetch_add(grain);
        if (begin >= count || failed.load()) return;
        const std::size_t end = std::min(count, begin + grain);
        for (std::size_t i = begin; i < end; ++i) fn(i);
      }
    } catch (...) {
      if (!failed.exchange(true)) error = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Streaming moments

/// Welford accumulator with Chan's pairwise merge.
struct Moments {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
  }

  void merge(const Moments& o) {
    if (o.count == 0) return;
    if (count == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(count);
    const double nb = static_cast<double>(o.count);
    const double d = o.mean - mean;
    const double n = na + nb;
    mean += d * nb / n;
    m2 += o.m2 + d * d * na * nb / n;
    count += o.count;
  }

  /// Unbiased (divisor count - 1).
  double variance() const { return count > 1 ? std::max(0.0, m2 / static_cast<double>(count - 1)) : 0.0; }
};

inline constexpr std::size_t kReduceChunk = 4096;

/// Moments of xs reduced chunk by chunk in index order.
inline Moments reduce_moments(const std::vector<double>& xs) {
  Moments total;
  for (std::size_t begin = 0; begin < xs.size(); begin += kReduceChunk) {
    Moments part;
    const std::size_t end = std::min(xs.size(), begin + kReduceChunk);
    for (std::size_t i = begin; i < end; ++i) part.add(xs[i]);
    total.merge(part);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Bootstrap

struct BootstrapResult {
  double ci_low = 0.0;
  double ci_high = 0.0;
  double se = 0.0;  // standard deviation of the replicate variances
};

inline constexpr std::size_t kBootstrapReplicates = 200;
inline constexpr std::uint64_t kBootstrapSalt = 0xb5ad4eceda1ce2a9ULL;

/// Percentile 95% interval of the unbiased variance over `replicates` resamples.
/// Replicate b draws from RandomStream(master_seed ^ salt, b).
inline BootstrapResult bootstrap_variance(const std::vector<double>& xs, std::uint64_t master_seed,
                                          std::size_t workers = 1,
                                          std::size_t replicates = kBootstrapReplicates) {
  BootstrapResult r;
  if (xs.size() < 2 || replicates < 2) return r;
  std::vector<double> reps(replicates);
  parallel_for(
      replicates, workers,
      [&](std::size_t b) {
        RandomStream rs(master_seed ^ kBootstrapSalt, b);
        Moments part;
        Moments total;
        for (std::size_t i = 0; i < xs.size(); ++i) {
          part.add(xs[rs.below(xs.size())]);
          if (part.count == kReduceChunk) {
            total.merge(part);
            part = {};
          }
        }
        total.merge(part);
        reps[b] = total.variance();
      },
      1);
  const Moments spread = reduce_moments(reps);
  r.se = std::sqrt(spread.variance());
  std::sort(reps.begin(), reps.end());
  auto quantile = [&](double p) {
    const double h = p * static_cast<double>(reps.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, reps.size() - 1);
    return reps[lo] + (h - static_cast<double>(lo)) * (reps[hi] - reps[lo]);
  };
  r.ci_low = quantile(0.025);
  r.ci_high = quantile(0.975);
  return r;
}

// ---------------------------------------------------------------------------
// Gradient ensemble

struct KMode {
  enum class Kind { fixed_slot, random_effective, random_all };
  Kind kind = Kind::random_effective;
  std::size_t slot = 0;

  static KMode fixed(std::size_t k) { return {Kind::fixed_slot, k}; }
  static KMode random_effective() { return {Kind::random_effective, 0}; }
  static KMode random_all() { return {Kind::random_all, 0}; }

  std::string str() const {
    switch (kind) {
      case Kind::fixed_slot: return "fixed_slot(" + std::to_string(slot) + ")";
      case Kind::random_effective: return "random_effective";
      default: return "random_all";
    }
  }

  /// Accepts "random_effective", "random_all", "fixed_slot(k)" or "fixed_slot:k".
  static KMode parse(const std::string& s) {
    if (s == "random_effective") return random_effective();
    if (s == "random_all") return random_all();
    const std::string head = "fixed_slot";
    if (s.rfind(head, 0) == 0 && s.size() > head.size() + 1) {
      std::string rest = s.substr(head.size() + 1);
      if (s[head.size()] == '(' && !rest.empty() && rest.back() == ')') rest.pop_back();
      else if (s[head.size()] != ':') throw std::invalid_argument("unknown k_mode '" + s + "'");
      std::size_t pos = 0;
      const unsigned long long k = std::stoull(rest, &pos);
      if (pos != rest.size()) throw std::invalid_argument("unknown k_mode '" + s + "'");
      return fixed(static_cast<std::size_t>(k));
    }
    throw std::invalid_argument("unknown k_mode '" + s + "'");
  }

  friend bool operator==(const KMode&, const KMode&) = default;
};

struct VarianceEstimate {
  std::uint64_t n_samples = 0;
  double mean = 0.0;
  double variance = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double bootstrap_se = 0.0;
  double mean_stderr = 0.0;
  std::uint64_t master_seed = 0;
  KMode k_mode;
  std::size_t n_eff = 0;
};

/// Per-sample gradients: sample i draws an instance from RandomStream(master_seed, i),
/// then (for random modes) its slot from the same stream.
inline std::vector<double> sample_gradients(std::shared_ptr<const CircuitSpec> spec, const PauliString& observable,
                                            const KMode& k_mode, std::size_t n_samples, std::uint64_t master_seed,
                                            std::size_t workers = 1) {
  spec->validate();
  const std::vector<std::size_t> effective = effective_parameters(*spec, observable);
  switch (k_mode.kind) {
    case KMode::Kind::fixed_slot:
      if (k_mode.slot >= spec->slot_count() || !spec->is_active(k_mode.slot)) {
        throw std::invalid_argument("run_ensemble: fixed slot " + std::to_string(k_mode.slot) + " is not active");
      }
      break;
    case KMode::Kind::random_effective:
      if (effective.empty()) throw std::invalid_argument("run_ensemble: no effective slots to draw from");
      break;
    default: break;
  }
  std::vector<double> grads(n_samples, 0.0);
  if (k_mode.kind == KMode::Kind::random_all && effective.empty()) return grads;
  const GradientKernel kernel(spec, observable);
  parallel_for(n_samples, workers, [&](std::size_t i) {
    RandomStream rs(master_seed, i);
    const CircuitInstance inst = sample_instance(spec, rs);
    std::size_t k = k_mode.slot;
    if (k_mode.kind == KMode::Kind::random_effective) {
      k = effective[rs.below(effective.size())];
    } else if (k_mode.kind == KMode::Kind::random_all) {
      k = rs.below(spec->slot_count());
      if (!spec->is_active(k)) return;  // pruned slot: no parameter, contributes 0
    }
    grads[i] = kernel.gradient(inst, k);
  });
  return grads;
}

/// Summary of a gradient sample set.
inline VarianceEstimate summarize(const std::vector<double>& grads, std::uint64_t master_seed, const KMode& k_mode,
                                  std::size_t n_eff, std::size_t workers = 1) {
  VarianceEstimate est;
  est.n_samples = grads.size();
  est.master_seed = master_seed;
  est.k_mode = k_mode;
  est.n_eff = n_eff;
  const Moments m = reduce_moments(grads);
  est.mean = m.mean;
  est.variance = m.variance();
  est.mean_stderr = grads.empty() ? 0.0 : std::sqrt(est.variance / static_cast<double>(grads.size()));
  const BootstrapResult b = bootstrap_variance(grads, master_seed, workers);
  est.bootstrap_se = b.se;
  // Percentile bounds can miss the point estimate for skewed samples; widen to contain it.
  est.ci_low = std::min(b.ci_low, est.variance);
  est.ci_high = std::max(b.ci_high, est.variance);
  return est;
}

inline VarianceEstimate run_ensemble(std::shared_ptr<const CircuitSpec> spec, const PauliString& observable,
                                     const KMode& k_mode, std::size_t n_samples, std::uint64_t master_seed,
                                     std::size_t workers = 1) {
  if (n_samples < 2) throw std::invalid_argument("run_ensemble: n_samples must be at least 2");
  const std::size_t ne = n_eff(*spec, observable);
  const auto grads = sample_gradients(spec, observable, k_mode, n_samples, master_seed, workers);
  return summarize(grads, master_seed, k_mode, ne, workers);
}

struct ExactGradientMoments {
  double mean = 0.0;
  double second = 0.0;  // E[g^2]
  double variance = 0.0;
};

/// Exact ensemble moments of the slot-k gradient by enumerating every generator
/// choice and a 3-point equispaced angle rule per active slot. The gradient has
/// degree 1 in each angle, so its square has degree 2 and the rule is exact.
inline ExactGradientMoments exact_gradient_moments(std::shared_ptr<const CircuitSpec> spec,
                                                   const PauliString& observable, std::size_t k,
                                                   std::uint64_t max_terms = 2'000'000) {
  constexpr std::size_t kAngles = 3;
  const auto slots = spec->active_slots();
  std::vector<std::vector<PauliString>> gens;
  double terms = 1.0;
  for (std::size_t slot : slots) {
    gens.push_back(generator_set(spec->n, spec->block_of(slot), spec->generator_policy));
    terms *= static_cast<double>(gens.back().size() * kAngles);
  }
  if (terms > static_cast<double>(max_terms)) throw std::domain_error("exact_gradient_moments: too many terms");
  const GradientKernel kernel(spec, observable);
  std::vector<std::size_t> idx(slots.size(), 0);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (;;) {
    GeneratorAssignment g;
    ParameterVector p;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      g.generators.push_back(gens[i][idx[i] / kAngles]);
      p.angles.push_back(2.0 * std::numbers::pi * static_cast<double>(idx[i] % kAngles) / kAngles);
    }
    const double x = kernel.gradient(CircuitInstance(spec, std::move(g), std::move(p)), k);
    sum += x;
    sum_sq += x * x;
    std::size_t d = 0;
    while (d < idx.size() && ++idx[d] == gens[d].size() * kAngles) idx[d++] = 0;
    if (d == idx.size()) break;
  }
  ExactGradientMoments m;
  m.mean = sum / terms;
  m.second = sum_sq / terms;
  m.variance = m.second - m.mean * m.mean;
  return m;
}

// ---------------------------------------------------------------------------
// Dense Monte Carlo oracles

struct OperatorEstimate {
  DenseOperator mean;
  Eigen::MatrixXd stderr_;  // entrywise standard error of the mean (complex modulus)
  std::uint64_t n_samples = 0;

  /// max_ij |mean - ref|_ij / stderr_ij, with zero-stderr entries compared exactly.
  double max_z(const DenseOperator& ref, double floor = 0.0) const {
    double worst = 0.0;
    const Matrix d = mean.matrix() - ref.matrix();
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
      for (Eigen::Index j = 0; j < d.cols(); ++j) {
        const double e = std::max(std::abs(d(i, j)) - floor, 0.0);
        const double se = stderr_(i, j);
        if (e == 0.0) continue;
        worst = std::max(worst, se > 0.0 ? e / se : std::numeric_limits<double>::infinity());
      }
    }
    return worst;
  }
};

namespace detail {

struct OperatorPartial {
  Matrix sum;
  Eigen::MatrixXd sum_sq;
  std::uint64_t count = 0;
};

inline OperatorEstimate mc_operator(std::size_t n, std::size_t n_samples, std::size_t workers,
                                    const std::function<Matrix(std::size_t)>& draw) {
  if (n_samples < 2) throw std::invalid_argument("mc oracle: n_samples must be at least 2");
  const auto dim = static_cast<Eigen::Index>(std::size_t{1} << n);
  const std::size_t chunks = (n_samples + kReduceChunk - 1) / kReduceChunk;
  std::vector<OperatorPartial> parts(chunks);
  parallel_for(
      chunks, workers,
      [&](std::size_t c) {
        OperatorPartial& p = parts[c];
        p.sum = Matrix::Zero(dim, dim);
        p.sum_sq = Eigen::MatrixXd::Zero(dim, dim);
        const std::size_t end = std::min(n_samples, (c + 1) * kReduceChunk);
        for (std::size_t i = c * kReduceChunk; i < end; ++i) {
          const Matrix x = draw(i);
          p.sum += x;
          p.sum_sq += x.cwiseAbs2();
          ++p.count;
        }
      },
      1);
  Matrix sum = Matrix::Zero(dim, dim);
  Eigen::MatrixXd sum_sq = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& p : parts) {
    sum += p.sum;
    sum_sq += p.sum_sq;
  }
  const double N = static_cast<double>(n_samples);
  const Matrix mean = sum / N;
  Eigen::MatrixXd var = (sum_sq / N - mean.cwiseAbs2()) * (N / (N - 1.0));
  var = var.cwiseMax(0.0);
  OperatorEstimate est{DenseOperator(mean), (var / N).cwiseSqrt(), n_samples};
  return est;
}

}  // namespace detail

/// Sample mean of U^dag a U over the ensemble (dense unitaries, n <= 6).
inline OperatorEstimate mc_first_moment(const DenseOperator& a, const CircuitSpec& spec, std::size_t n_samples,
                                        std::uint64_t master_seed, std::size_t workers = 1) {
  if (a.n_qubits() != spec.n) throw std::invalid_argument("mc_first_moment: size mismatch");
  if (spec.n > kMaxUnitaryQubits) throw std::domain_error("mc_first_moment: more than 6 qubits");
  const auto sp = std::make_shared<const CircuitSpec>(spec);
  return detail::mc_operator(spec.n, n_samples, workers, [&](std::size_t i) {
    RandomStream rs(master_seed, i);
    const Matrix u = dense_unitary(sample_instance(sp, rs)).matrix();
    return Matrix(u.adjoint() * a.matrix() * u);
  });
}

/// Sample mean of U^dag a U b U^dag c U over the ensemble (n <= 5).
inline OperatorEstimate mc_second_moment(const DenseOperator& a, const DenseOperator& b, const DenseOperator& c,
                                         const CircuitSpec& spec, std::size_t n_samples, std::uint64_t master_seed,
                                         std::size_t workers = 1) {
  if (a.n_qubits() != spec.n || b.dim() != a.dim() || c.dim() != a.dim()) {
    throw std::invalid_argument("mc_second_moment: size mismatch");
  }
  if (spec.n > 5) throw std::domain_error("mc_second_moment: more than 5 qubits");
  const auto sp = std::make_shared<const CircuitSpec>(spec);
  return detail::mc_operator(spec.n, n_samples, workers, [&](std::size_t i) {
    RandomStream rs(master_seed, i);
    const Matrix u = dense_unitary(sample_instance(sp, rs)).matrix();
    const Matrix ud = u.adjoint();
    return Matrix(ud * a.matrix() * u * b.matrix() * ud * c.matrix() * u);
  });
}

// ---------------------------------------------------------------------------
// Fits

struct ExponentialFit {
  double amplitude = 0.0;  // y = amplitude * base^x
  double base = 0.0;
  double slope = 0.0;      // ln(base)
  double intercept = 0.0;  // ln(amplitude)
  double r2 = 0.0;
};

/// Least squares of ln y on x.
inline ExponentialFit fit_exponential(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("fit_exponential: size mismatch");
  if (xs.size() < 3) throw std::invalid_argument("fit_exponential: need at least 3 points");
  for (double y : ys) {
    if (!(y > 0.0)) throw std::invalid_argument("fit_exponential: y values must be positive");
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += std::log(ys[i]);
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = std::log(ys[i]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_exponential: x values must not all coincide");
  ExponentialFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.base = std::exp(f.slope);
  f.amplitude = std::exp(f.intercept);
  double ss_res = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = std::log(ys[i]) - (f.intercept + f.slope * xs[i]);
    ss_res += r * r;
  }
  f.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return f;
}

struct ProportionalFit {
  double slope = 0.0;
  double r2 = 0.0;  // centred: 1 - SS_res / sum (y - mean y)^2
};

/// Least squares of y = slope * x (intercept fixed at 0).
inline ProportionalFit fit_proportional(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw std::invalid_argument("fit_proportional: need matched points");
  double sxx = 0, sxy = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
    my += ys[i];
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_proportional: all x are zero");
  my /= static_cast<double>(ys.size());
  ProportionalFit f;
  f.slope = sxy / sxx;
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - f.slope * xs[i];
    ss_res += r * r;
    ss_tot += (ys[i] - my) * (ys[i] - my);
  }
  f.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return f;
}

}  // namespace plateau
