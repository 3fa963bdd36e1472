#pragma once

// Flattened gate sequences for concrete circuit instances, plus the dense
// unitary oracle.

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "plateau/circuit.hpp"
#include "plateau/dense.hpp"
#include "plateau/state.hpp"

namespace plateau {

struct GateOp {
  enum class Kind { rotation, entangler };
  Kind kind = Kind::rotation;
  std::size_t slot = 0;        // rotation: slot index in the source spec
  PauliString generator;       // rotation only
  double angle = 0.0;          // rotation only
  std::size_t pattern = 0;     // entangler: index into Program::patterns
};

/// Applied-order gate list on an n-qubit register starting from `init`.
struct Program {
  std::size_t n = 0;
  InitKind init = InitKind::zeros;
  std::vector<GateOp> ops;
  std::shared_ptr<const std::vector<EntanglerPattern>> patterns;

  void run(StateVector& v, std::size_t begin, std::size_t end) const {
    for (std::size_t i = begin; i < end; ++i) {
      const GateOp& op = ops[i];
      if (op.kind == GateOp::Kind::rotation) {
        v.rotate(op.generator, op.angle);
      } else {
        v.entangle((*patterns)[op.pattern]);
      }
    }
  }

  StateVector run() const {
    StateVector v = init_state(n, init);
    run(v, 0, ops.size());
    return v;
  }
};

/// Per layer: active rotations in slot order, then the layer's entangler.
inline Program build_program(const CircuitInstance& inst) {
  const CircuitSpec& spec = *inst.spec;
  Program prog;
  prog.n = spec.n;
  prog.init = spec.init_kind;
  prog.patterns = std::make_shared<const std::vector<EntanglerPattern>>(
      std::vector<EntanglerPattern>{spec.entangler_pattern()});
  std::size_t i = 0;
  for (std::size_t layer = 0; layer < spec.l; ++layer) {
    for (; i < inst.slots.size() && spec.layer_of(inst.slots[i]) == layer; ++i) {
      GateOp op;
      op.kind = GateOp::Kind::rotation;
      op.slot = inst.slots[i];
      op.generator = inst.generators.generators[i];
      op.angle = inst.params.angles[i];
      prog.ops.push_back(std::move(op));
    }
    if (spec.entangler != EntanglerKind::none) {
      GateOp op;
      op.kind = GateOp::Kind::entangler;
      op.pattern = 0;
      prog.ops.push_back(std::move(op));
    }
  }
  return prog;
}

/// Final state U(theta)|init>.
inline StateVector simulate(const CircuitInstance& inst) {
  if (inst.spec->n > kMaxStateQubits) throw std::invalid_argument("simulate: more than 24 qubits");
  return build_program(inst).run();
}

/// Tr(rho U^dag O U) with rho = |init><init|; `init` overrides the spec's init kind.
inline double loss(const CircuitInstance& inst, const PauliString& observable, InitKind init) {
  if (observable.n_sites() != inst.spec->n) throw std::invalid_argument("loss: observable size mismatch");
  Program prog = build_program(inst);
  prog.init = init;
  return prog.run().expectation(observable);
}

inline double loss(const CircuitInstance& inst, const PauliString& observable) {
  return loss(inst, observable, inst.spec->init_kind);
}

/// Circuit split at slot k: minus_part holds every gate strictly before slot k's
/// rotation; plus_part starts with that rotation.
struct SplitCircuit {
  std::size_t k = 0;
  Program minus_part;
  Program plus_part;
};

inline SplitCircuit split_at(const CircuitInstance& inst, std::size_t k) {
  inst.require_index(k);
  const Program full = build_program(inst);
  std::size_t cut = 0;
  while (cut < full.ops.size() &&
         !(full.ops[cut].kind == GateOp::Kind::rotation && full.ops[cut].slot == k)) {
    ++cut;
  }
  SplitCircuit sc;
  sc.k = k;
  sc.minus_part = full;
  sc.plus_part = full;
  sc.minus_part.ops.assign(full.ops.begin(), full.ops.begin() + static_cast<std::ptrdiff_t>(cut));
  sc.plus_part.ops.assign(full.ops.begin() + static_cast<std::ptrdiff_t>(cut), full.ops.end());
  return sc;
}

// ---------------------------------------------------------------------------
// Dense oracle. Gate matrices are built from their definitions, not from the
// statevector kernels, so the two can check each other.

inline constexpr std::size_t kMaxUnitaryQubits = 6;

/// cos(theta/2) I - i sin(theta/2) P.
inline DenseOperator rotation_matrix(const PauliString& p, double theta) {
  const DenseOperator pm = DenseOperator::from_pauli(p);
  const DenseOperator id = DenseOperator::identity(p.n_sites());
  return std::cos(0.5 * theta) * id + cplx{0.0, -std::sin(0.5 * theta)} * pm;
}

inline DenseOperator cz_matrix(std::size_t n, std::size_t a, std::size_t b) {
  DenseOperator m = DenseOperator::identity(n);
  const std::size_t dim = std::size_t{1} << n;
  const std::uint64_t ab = std::uint64_t{1} << (n - 1 - a);
  const std::uint64_t bb = std::uint64_t{1} << (n - 1 - b);
  for (std::uint64_t j = 0; j < dim; ++j) {
    if ((j & ab) && (j & bb)) m.matrix()(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = -1.0;
  }
  return m;
}

inline DenseOperator cx_matrix(std::size_t n, std::size_t control, std::size_t target) {
  const std::size_t dim = std::size_t{1} << n;
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  const std::uint64_t cb = std::uint64_t{1} << (n - 1 - control);
  const std::uint64_t tb = std::uint64_t{1} << (n - 1 - target);
  for (std::uint64_t j = 0; j < dim; ++j) {
    const std::uint64_t out = (j & cb) ? (j ^ tb) : j;
    m(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(j)) = 1.0;
  }
  return DenseOperator(std::move(m));
}

inline DenseOperator entangler_matrix(const EntanglerPattern& pattern) {
  DenseOperator u = DenseOperator::identity(pattern.n_qubits());
  if (pattern.kind() == EntanglerKind::none) return u;
  for (const auto& [a, b] : pattern.pairs()) {
    const DenseOperator g = pattern.kind() == EntanglerKind::cz_brick ? cz_matrix(pattern.n_qubits(), a, b)
                                                                      : cx_matrix(pattern.n_qubits(), a, b);
    u = g * u;
  }
  return u;
}

inline DenseOperator dense_unitary(const Program& prog) {
  if (prog.n > kMaxUnitaryQubits) throw std::domain_error("dense_unitary: more than 6 qubits");
  DenseOperator u = DenseOperator::identity(prog.n);
  std::vector<DenseOperator> ent;
  for (const auto& p : *prog.patterns) ent.push_back(entangler_matrix(p));
  for (const GateOp& op : prog.ops) {
    u = (op.kind == GateOp::Kind::rotation ? rotation_matrix(op.generator, op.angle) : ent[op.pattern]) * u;
  }
  const double err =
      DenseOperator::max_abs_diff(u.matrix().adjoint() * u.matrix(), DenseOperator::identity(prog.n).matrix());
  if (err > 1e-10) throw std::runtime_error("dense_unitary: result is not unitary");
  return u;
}

inline DenseOperator dense_unitary(const CircuitInstance& inst) {
  if (inst.spec->n > kMaxUnitaryQubits) throw std::domain_error("dense_unitary: more than 6 qubits");
  return dense_unitary(build_program(inst));
}

}  // namespace plateau
