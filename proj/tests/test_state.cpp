#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "plateau/program.hpp"
#include "plateau/state.hpp"
#include "test_util.hpp"

using namespace plateau;

TEST(InitState, Examples) {
  const auto z1 = init_state(1, InitKind::zeros);
  EXPECT_EQ(z1[0], cplx(1, 0));
  EXPECT_EQ(z1[1], cplx(0, 0));
  const auto p2 = init_state(2, InitKind::plus);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(std::abs(p2[j] - cplx(0.5, 0)), 0.0, 1e-15);
  const auto z3 = init_state(3, InitKind::zeros);
  EXPECT_EQ(z3.dim(), 8u);
  EXPECT_EQ(z3[0], cplx(1, 0));
  EXPECT_THROW(init_state(0, InitKind::zeros), std::invalid_argument);
  EXPECT_THROW(init_state(25, InitKind::zeros), std::invalid_argument);
}

TEST(Rotation, ZeroAndFullTurn) {
  std::mt19937_64 rng(1);
  const auto v = plateau::testing::random_state(3, rng);
  const auto p = PauliString::parse("XZY");
  const auto same = apply_rotation(v, p, 0.0);
  for (std::size_t j = 0; j < v.dim(); ++j) EXPECT_LT(std::abs(same[j] - v[j]), 1e-15);
  const auto neg = apply_rotation(v, p, 2 * std::numbers::pi);
  for (std::size_t j = 0; j < v.dim(); ++j) EXPECT_LT(std::abs(neg[j] + v[j]), 1e-14);
  EXPECT_NEAR(std::abs(neg.inner(v)), 1.0, 1e-14);
}

TEST(Rotation, RxHalfPiOnZero) {
  const auto v = apply_rotation(init_state(1, InitKind::zeros), PauliString::parse("X"), std::numbers::pi / 2);
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(std::abs(v[0] - cplx(r, 0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(v[1] - cplx(0, -r)), 0.0, 1e-15);
}

TEST(Rotation, MatchesDenseExponential) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ang(0, 2 * std::numbers::pi);
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 1 + i % 4;
    const auto p = plateau::testing::random_pauli(n, rng);
    const double th = ang(rng);
    const auto v = plateau::testing::random_state(n, rng);
    const auto got = apply_rotation(v, p, th);
    // exp(-i th/2 P) via Eigen's eigen-decomposition-free route: P^2 = I.
    const Matrix pm = plateau::testing::kron_letters(p.str());
    const Matrix u = std::cos(th / 2) * Matrix::Identity(pm.rows(), pm.cols()) - cplx(0, std::sin(th / 2)) * pm;
    Eigen::VectorXcd vin(static_cast<Eigen::Index>(v.dim()));
    for (std::size_t j = 0; j < v.dim(); ++j) vin(static_cast<Eigen::Index>(j)) = v[j];
    const Eigen::VectorXcd want = u * vin;
    for (std::size_t j = 0; j < v.dim(); ++j) EXPECT_LT(std::abs(got[j] - want(static_cast<Eigen::Index>(j))), 1e-13);
    EXPECT_NEAR(got.norm(), 1.0, 1e-12);
  }
}

TEST(Rotation, SameGeneratorComposesAdditively) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto p = plateau::testing::random_pauli(4, rng);
    const auto v = plateau::testing::random_state(4, rng);
    const double a = 0.37 * i;
    const double b = 1.1 - 0.05 * i;
    const auto two = apply_rotation(apply_rotation(v, p, a), p, b);
    const auto one = apply_rotation(v, p, a + b);
    for (std::size_t j = 0; j < v.dim(); ++j) EXPECT_LT(std::abs(two[j] - one[j]), 1e-12);
  }
}

TEST(Rotation, NormPreservedOverManyGates) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ang(0, 2 * std::numbers::pi);
  StateVector v = init_state(12, InitKind::zeros);
  const EntanglerPattern cz(EntanglerKind::cz_brick, 12);
  const EntanglerPattern cx(EntanglerKind::cx_brick, 12);
  for (int i = 0; i < 10000; ++i) {
    PauliString p(12);
    const std::size_t q = static_cast<std::size_t>(i) % 11;
    p.set(q, static_cast<Letter>(1 + i % 3));
    p.set(q + 1, static_cast<Letter>(i % 4));
    v.rotate(p, ang(rng));
    if (i % 97 == 0) v.entangle(cz);
    if (i % 131 == 0) v.entangle(cx);
  }
  EXPECT_LT(std::abs(v.norm() - 1.0), 1e-9);
}

TEST(Rotation, RejectsMismatchAndNonHermitian) {
  StateVector v = init_state(2, InitKind::zeros);
  EXPECT_THROW(v.rotate(PauliString::parse("X"), 0.1), std::invalid_argument);
  EXPECT_THROW(v.rotate(PauliString::parse("iXX"), 0.1), std::invalid_argument);
}

TEST(Entangler, Examples) {
  const auto v = init_state(3, InitKind::plus);
  const auto same = apply_entangler(v, EntanglerPattern(EntanglerKind::none, 3));
  for (std::size_t j = 0; j < v.dim(); ++j) EXPECT_EQ(same[j], v[j]);

  StateVector s11(2);
  s11[3] = 1.0;
  const auto cz = apply_entangler(s11, EntanglerPattern(EntanglerKind::cz_brick, 2));
  EXPECT_EQ(cz[3], cplx(-1, 0));

  StateVector s10(2);
  s10[2] = 1.0;  // |10>: qubit 0 set
  const auto cx = apply_entangler(s10, EntanglerPattern(EntanglerKind::cx_brick, 2));
  EXPECT_EQ(cx[3], cplx(1, 0));
  EXPECT_EQ(cx[2], cplx(0, 0));
}

TEST(Entangler, PatternColumns) {
  const EntanglerPattern p(EntanglerKind::cz_brick, 5);
  ASSERT_EQ(p.even_column().size(), 2u);
  ASSERT_EQ(p.odd_column().size(), 2u);
  EXPECT_EQ(p.even_column()[1], (EntanglerPattern::Pair{2, 3}));
  EXPECT_EQ(p.odd_column()[0], (EntanglerPattern::Pair{1, 2}));
  EXPECT_THROW(EntanglerPattern(EntanglerKind::cz_brick, 3, {{0, 1}, {1, 2}}, {}), std::invalid_argument);
}

TEST(Entangler, MatchesDenseMatrices) {
  std::mt19937_64 rng(6);
  for (auto kind : {EntanglerKind::cz_brick, EntanglerKind::cx_brick}) {
    for (std::size_t n = 2; n <= 5; ++n) {
      const EntanglerPattern pat(kind, n);
      const auto v = plateau::testing::random_state(n, rng);
      const auto got = apply_entangler(v, pat);
      const Matrix u = entangler_matrix(pat).matrix();
      for (std::size_t r = 0; r < v.dim(); ++r) {
        cplx acc = 0;
        for (std::size_t c = 0; c < v.dim(); ++c) acc += u(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * v[c];
        EXPECT_LT(std::abs(acc - got[r]), 1e-14);
      }
    }
  }
}

TEST(Expectation, Examples) {
  EXPECT_DOUBLE_EQ(expectation(init_state(1, InitKind::zeros), PauliString::parse("Z")), 1.0);
  EXPECT_NEAR(expectation(init_state(1, InitKind::plus), PauliString::parse("Z")), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(expectation(init_state(2, InitKind::zeros), PauliString::parse("ZZ")), 1.0);
  EXPECT_NEAR(expectation(init_state(2, InitKind::plus), PauliString::parse("XX")), 1.0, 1e-15);
  EXPECT_THROW(expectation(init_state(1, InitKind::zeros), PauliString::parse("-Z")), std::invalid_argument);
}

TEST(Expectation, MatchesDenseAndIgnoresGlobalPhase) {
  std::mt19937_64 rng(10);
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 1 + i % 5;
    const auto p = plateau::testing::random_pauli(n, rng);
    auto v = plateau::testing::random_state(n, rng);
    const Matrix pm = plateau::testing::kron_letters(p.str());
    cplx want = 0;
    for (std::size_t r = 0; r < v.dim(); ++r)
      for (std::size_t c = 0; c < v.dim(); ++c)
        want += std::conj(v[r]) * pm(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * v[c];
    const double got = v.expectation(p);
    EXPECT_NEAR(got, want.real(), 1e-13);
    EXPECT_LE(std::abs(got), 1.0 + 1e-12);
    const cplx phase = std::polar(1.0, 0.3 * i);
    for (auto& a : v.amplitudes()) a *= phase;
    EXPECT_NEAR(v.expectation(p), got, 1e-13);
  }
}
