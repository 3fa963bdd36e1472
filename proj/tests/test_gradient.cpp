#include <gtest/gtest.h>

#include <numbers>

#include "plateau/gradient.hpp"

using namespace plateau;

namespace {

constexpr double kPi = std::numbers::pi;

CircuitInstance single_qubit(const char* gen, double theta) {
  const auto spec = std::make_shared<const CircuitSpec>(CircuitSpec::make(1, 1, 1, EntanglerKind::none));
  return CircuitInstance(spec, GeneratorAssignment{{PauliString::parse(gen)}}, ParameterVector{{theta}});
}

std::shared_ptr<const CircuitSpec> fig5() {
  return std::make_shared<const CircuitSpec>(CircuitSpec::make(6, 3, 2, EntanglerKind::cz_brick));
}

}  // namespace

TEST(Loss, Examples) {
  const auto spec = std::make_shared<const CircuitSpec>(CircuitSpec::make(3, 1, 1, EntanglerKind::none));
  RandomStream rs(1, 0);
  auto inst = sample_instance(spec, rs);
  for (auto& a : inst.params.angles) a = 0.0;
  EXPECT_DOUBLE_EQ(loss(inst, PauliString::parse("ZZZ")), 1.0);
  EXPECT_NEAR(loss(single_qubit("X", kPi), PauliString::parse("Z")), -1.0, 1e-15);
}

TEST(Loss, MatchesDenseUnitary) {
  const auto spec = std::make_shared<const CircuitSpec>(CircuitSpec::make(2, 1, 1, EntanglerKind::cz_brick));
  const CircuitInstance inst(spec, GeneratorAssignment{{PauliString::parse("XI"), PauliString::parse("IY")}},
                             ParameterVector{{0.7, 1.9}});
  const Matrix u = dense_unitary(inst).matrix();
  Eigen::VectorXcd v0 = Eigen::VectorXcd::Zero(4);
  v0(0) = 1.0;
  const Eigen::VectorXcd v = u * v0;
  for (const char* o : {"ZI", "IZ", "XX", "YZ"}) {
    const Matrix om = DenseOperator::from_pauli(PauliString::parse(o)).matrix();
    const double want = (v.adjoint() * om * v)(0).real();
    EXPECT_NEAR(loss(inst, PauliString::parse(o)), want, 1e-12) << o;
  }
}

TEST(Loss, SimulatorMatchesDenseOnRandomInstances) {
  for (std::uint64_t i = 0; i < 40; ++i) {
    const std::size_t n = 2 + i % 5;
    const std::size_t s = (n % 2 == 0 && i % 2) ? 2 : 1;
    const auto spec = std::make_shared<const CircuitSpec>(
        CircuitSpec::make(n, 1 + i % 3, s, static_cast<EntanglerKind>(i % 3), GeneratorPolicy::full,
                          i % 4 == 0 ? InitKind::plus : InitKind::zeros));
    RandomStream rs(77, i);
    const auto inst = sample_instance(spec, rs);
    const auto prog = build_program(inst);
    const Matrix u = dense_unitary(prog).matrix();
    const StateVector init = init_state(n, prog.init);
    Eigen::VectorXcd v0(static_cast<Eigen::Index>(init.dim()));
    for (std::size_t j = 0; j < init.dim(); ++j) v0(static_cast<Eigen::Index>(j)) = init[j];
    const Eigen::VectorXcd want = u * v0;
    const StateVector got = simulate(inst);
    for (std::size_t j = 0; j < got.dim(); ++j) EXPECT_LT(std::abs(got[j] - want(static_cast<Eigen::Index>(j))), 1e-12);
  }
}

TEST(SplitCircuit, ConcatenationReproducesFull) {
  RandomStream rs(4, 0);
  const auto inst = sample_instance(fig5(), rs);
  const auto full = build_program(inst);
  for (std::size_t k : inst.slots) {
    const auto sc = split_at(inst, k);
    ASSERT_EQ(sc.minus_part.ops.size() + sc.plus_part.ops.size(), full.ops.size());
    EXPECT_EQ(sc.plus_part.ops.front().slot, k);
    StateVector v = sc.minus_part.run();
    sc.plus_part.run(v, 0, sc.plus_part.ops.size());
    const StateVector w = full.run();
    for (std::size_t j = 0; j < v.dim(); ++j) EXPECT_EQ(v[j], w[j]);
  }
}

TEST(Gradient, SingleQubitExamples) {
  const auto z = PauliString::parse("Z");
  EXPECT_NEAR(grad_parameter_shift(single_qubit("X", 0.0), z, 0), 0.0, 1e-15);
  EXPECT_NEAR(grad_parameter_shift(single_qubit("X", kPi / 2), z, 0), -1.0, 1e-15);
  EXPECT_NEAR(grad_commutator(single_qubit("X", 0.0), z, 0), 0.0, 1e-15);
  EXPECT_NEAR(grad_commutator(single_qubit("X", kPi / 2), z, 0), -1.0, 1e-14);
  EXPECT_NEAR(grad_finite_difference(single_qubit("X", kPi / 2), z, 0, 1e-4), -1.0, 2e-9);
  // Z generator commutes with the observable: theta-independent.
  EXPECT_NEAR(grad_parameter_shift(single_qubit("Z", 1.3), z, 0), 0.0, 1e-15);
  EXPECT_NEAR(grad_commutator(single_qubit("Z", 1.3), z, 0), 0.0, 1e-15);
  EXPECT_NEAR(grad_finite_difference(single_qubit("Z", 1.3), z, 0, 1e-4), 0.0, 1e-12);
}

TEST(Gradient, Errors) {
  const auto z = PauliString::parse("Z");
  EXPECT_THROW(grad_finite_difference(single_qubit("X", 0.1), z, 0, 1e-1), std::invalid_argument);
  EXPECT_THROW(grad_finite_difference(single_qubit("X", 0.1), z, 0, 1e-8), std::invalid_argument);
  RandomStream rs(1, 0);
  auto pruned = std::make_shared<const CircuitSpec>(prune(CircuitSpec::make(2, 1, 1), 1.0, rs));
  const CircuitInstance empty(pruned, {}, {});
  EXPECT_THROW(grad_parameter_shift(empty, PauliString::parse("ZZ"), 0), std::invalid_argument);
}

TEST(Gradient, ThreeWayAgreement) {
  std::size_t triples = 0;
  double worst_comm = 0.0;
  for (std::uint64_t i = 0; i < 240; ++i) {
    const std::size_t n = 1 + i % 8;
    std::size_t s = 1;
    if (n % 3 == 0 && i % 3 == 1) s = 3;
    else if (n % 2 == 0 && i % 2 == 0) s = 2;
    const auto spec = std::make_shared<const CircuitSpec>(
        CircuitSpec::make(n, 1 + i % 3, s, static_cast<EntanglerKind>(i % 3),
                          s == 1 && i % 5 == 0 ? GeneratorPolicy::xyz_only : GeneratorPolicy::full_minus_identity,
                          i % 4 == 3 ? InitKind::plus : InitKind::zeros));
    RandomStream rs(99, i);
    const auto inst = sample_instance(spec, rs);
    PauliString obs(n);
    RandomStream ors(100, i);
    for (std::size_t q = 0; q < n; ++q) obs.set(q, static_cast<Letter>(ors.below(4)));
    if (obs.is_identity()) obs.set(0, Letter::Z);
    const std::size_t k = inst.slots[ors.below(inst.slots.size())];
    const double ps = grad_parameter_shift(inst, obs, k);
    const double cm = grad_commutator(inst, obs, k);
    const double h = 1e-4;
    const double fd = grad_finite_difference(inst, obs, k, h);
    worst_comm = std::max(worst_comm, std::abs(ps - cm));
    EXPECT_LE(std::abs(ps - cm), 1e-10);
    EXPECT_LE(std::abs(ps - fd), 10 * h * h);
    EXPECT_LE(std::abs(loss(inst, obs)), 1.0 + 1e-12);
    ++triples;
  }
  EXPECT_GE(triples, 200u);
  EXPECT_LE(worst_comm, 1e-10);
}

TEST(Gradient, IneffectiveSlotsAreZero) {
  const auto spec = fig5();
  const auto obs = PauliString::single(6, 0, Letter::Z);
  for (std::uint64_t i = 0; i < 100; ++i) {
    RandomStream rs(321, i);
    const auto inst = sample_instance(spec, rs);
    for (std::size_t k : {5u, 7u, 8u}) {
      EXPECT_NEAR(grad_parameter_shift(inst, obs, k), 0.0, 1e-12);
      EXPECT_NEAR(grad_commutator(inst, obs, k), 0.0, 1e-12);
    }
  }
}

TEST(GradientKernel, MatchesFullParameterShift) {
  for (std::uint64_t i = 0; i < 60; ++i) {
    const std::size_t n = 2 + i % 7;
    const std::size_t s = (n % 2 == 0 && i % 2) ? 2 : 1;
    const auto spec = std::make_shared<const CircuitSpec>(CircuitSpec::make(
        n, 1 + i % 4, s, static_cast<EntanglerKind>(i % 3), GeneratorPolicy::full_minus_identity,
        i % 5 == 0 ? InitKind::plus : InitKind::zeros));
    RandomStream ors(5, i);
    PauliString obs(n);
    obs.set(ors.below(n), static_cast<Letter>(1 + ors.below(3)));
    if (i % 3 == 0) obs.set(ors.below(n), Letter::Z);
    const GradientKernel kernel(spec, obs);
    EXPECT_LE(kernel.simulated_qubits(), n);
    RandomStream rs(6, i);
    const auto inst = sample_instance(spec, rs);
    for (std::size_t k : inst.slots) {
      EXPECT_NEAR(kernel.gradient(inst, k), grad_parameter_shift(inst, obs, k), 1e-12) << "trial " << i << " slot " << k;
    }
  }
}

TEST(GradientKernel, Figure5UsesCone) {
  const auto spec = fig5();
  const GradientKernel kernel(spec, PauliString::single(6, 0, Letter::Z));
  RandomStream rs(8, 0);
  const auto inst = sample_instance(spec, rs);
  EXPECT_EQ(kernel.gradient(inst, 5), 0.0);
  EXPECT_EQ(kernel.gradient(inst, 8), 0.0);
}

TEST(GradientKernel, SplitsIntoProductComponents) {
  const auto spec = std::make_shared<const CircuitSpec>(CircuitSpec::make(8, 1, 2, EntanglerKind::none));
  const auto obs = PauliString::parse("ZZZZZZII");
  const GradientKernel kernel(spec, obs);
  EXPECT_EQ(kernel.component_count(), 3u);
  EXPECT_EQ(kernel.simulated_qubits(), 2u);
  for (std::uint64_t i = 0; i < 20; ++i) {
    RandomStream rs(17, i);
    const auto inst = sample_instance(spec, rs);
    for (std::size_t k : inst.slots) EXPECT_NEAR(kernel.gradient(inst, k), grad_parameter_shift(inst, obs, k), 1e-12);
  }
  // The trailing entangler is folded into the observable, so one layer is always a product.
  for (auto kind : {EntanglerKind::cz_brick, EntanglerKind::cx_brick}) {
    const auto one = std::make_shared<const CircuitSpec>(CircuitSpec::make(6, 1, 1, kind));
    EXPECT_EQ(GradientKernel(one, PauliString::parse("ZZZZZZ")).simulated_qubits(), 1u);
    EXPECT_EQ(GradientKernel(one, PauliString::parse("XZYZZX")).simulated_qubits(), 1u);
  }
}

TEST(Clifford, ConjugationMatchesDense) {
  for (std::uint64_t i = 0; i < 200; ++i) {
    const std::size_t n = 2 + i % 4;
    const auto kind = i % 2 ? EntanglerKind::cx_brick : EntanglerKind::cz_brick;
    const EntanglerPattern pat(kind, n);
    RandomStream rs(3, i);
    PauliString o(n);
    for (std::size_t q = 0; q < n; ++q) o.set(q, static_cast<Letter>(rs.below(4)));
    const auto [sign, img] = conjugate_through_entangler(o, pat);
    const DenseOperator w = entangler_matrix(pat);
    const DenseOperator want = w.adjoint() * DenseOperator::from_pauli(o) * w;
    EXPECT_LT(max_abs_diff(want, sign * DenseOperator::from_pauli(img)), 1e-14) << o.str();
  }
}

TEST(GradientKernel, NegativeSignAfterConjugation) {
  // CX(0,1) maps Y (x) Y to -X (x) Z; the sign must reach the gradient.
  const auto spec = std::make_shared<const CircuitSpec>(CircuitSpec::make(2, 2, 1, EntanglerKind::cx_brick));
  const auto obs = PauliString::parse("YY");
  const GradientKernel kernel(spec, obs);
  for (std::uint64_t i = 0; i < 30; ++i) {
    RandomStream rs(4, i);
    const auto inst = sample_instance(spec, rs);
    for (std::size_t k : inst.slots) EXPECT_NEAR(kernel.gradient(inst, k), grad_parameter_shift(inst, obs, k), 1e-12);
  }
}
