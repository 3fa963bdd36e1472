#pragma once

// Gradients of L(theta) = <init| U^dag O U |init> with respect to one slot angle.
//
// Three routes: parameter shift (production), commutator form (from the split
// circuit) and central finite differences. GradientKernel is the parameter-shift
// route on the exact simulation light cone, used by the ensemble estimator.

#include <algorithm>
#include <bit>
#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include "plateau/circuit.hpp"
#include "plateau/program.hpp"
#include "plateau/state.hpp"

namespace plateau {

inline double grad_parameter_shift(const CircuitInstance& inst, const PauliString& observable, std::size_t k) {
  const std::size_t idx = inst.require_index(k);
  const double theta = inst.params.angles[idx];
  constexpr double kShift = std::numbers::pi / 2;
  return 0.5 * (loss(inst.with_angle(k, theta + kShift), observable) -
                loss(inst.with_angle(k, theta - kShift), observable));
}

/// <bra| O |ket> for a Pauli string O.
inline cplx matrix_element(const StateVector& bra, const PauliString& o, const StateVector& ket) {
  const StateVector ok = apply_pauli(o, ket);
  return bra.inner(ok);
}

/// (i/2) <psi_-| [P_k, O_+] |psi_-> with O_+ = U_+^dag O U_+ and |psi_-> = U_-|init>,
/// i.e. (i/2) Tr(O_+ [rho_-, P_k]). Equals Im <psi_-| O_+ P_k |psi_->.
inline double grad_commutator(const CircuitInstance& inst, const PauliString& observable, std::size_t k) {
  const std::size_t idx = inst.require_index(k);
  const PauliString& pk = inst.generators.generators[idx];
  const SplitCircuit sc = split_at(inst, k);
  const StateVector psi = sc.minus_part.run();
  StateVector b = psi;
  sc.plus_part.run(b, 0, sc.plus_part.ops.size());
  StateVector a = apply_pauli(pk, psi);
  sc.plus_part.run(a, 0, sc.plus_part.ops.size());
  const cplx z = matrix_element(b, observable, a);  // <psi| O_+ P |psi>
  // (i/2)(conj(z) - z) = Im z
  return (cplx{0.0, 0.5} * (std::conj(z) - z)).real();
}

inline double grad_finite_difference(const CircuitInstance& inst, const PauliString& observable, std::size_t k,
                                     double h) {
  if (!(h >= 1e-6 && h <= 1e-2)) throw std::invalid_argument("grad_finite_difference: h must be in [1e-6, 1e-2]");
  const std::size_t idx = inst.require_index(k);
  const double theta = inst.params.angles[idx];
  return (loss(inst.with_angle(k, theta + h), observable) - loss(inst.with_angle(k, theta - h), observable)) /
         (2.0 * h);
}

/// W^dag o W for one entangler layer W (a Clifford), as a sign and a Pauli string.
/// Every CZ and CX is self-inverse, so the gates are conjugated in reverse order.
inline std::pair<double, PauliString> conjugate_through_entangler(const PauliString& o,
                                                                  const EntanglerPattern& pattern) {
  if (pattern.kind() != EntanglerKind::none && pattern.n_qubits() != o.n_sites()) {
    throw std::invalid_argument("conjugate_through_entangler: size mismatch");
  }
  PauliString cur = o;
  const auto pairs = pattern.pairs();
  const std::size_t n = o.n_sites();
  for (auto it = pairs.rbegin(); it != pairs.rend() && pattern.kind() != EntanglerKind::none; ++it) {
    const auto [a, b] = *it;
    PauliString xa = PauliString::single(n, a, Letter::X);
    PauliString za = PauliString::single(n, a, Letter::Z);
    PauliString xb = PauliString::single(n, b, Letter::X);
    PauliString zb = PauliString::single(n, b, Letter::Z);
    if (pattern.kind() == EntanglerKind::cz_brick) {
      xa = pauli_mul(xa, PauliString::single(n, b, Letter::Z));
      xb = pauli_mul(xb, PauliString::single(n, a, Letter::Z));
    } else {  // CX with control a, target b
      xa = pauli_mul(xa, PauliString::single(n, b, Letter::X));
      zb = pauli_mul(PauliString::single(n, a, Letter::Z), zb);
    }
    // cur = rest * s_a * s_b with s_q = i^(x z) X^x Z^z; map each factor.
    PauliString rest = cur;
    rest.set(a, Letter::I);
    rest.set(b, Letter::I);
    PauliString img = rest;
    for (const auto& [q, xi, zi] : {std::tuple{a, xa, za}, std::tuple{b, xb, zb}}) {
      const Letter l = cur.letter(q);
      const bool x = l == Letter::X || l == Letter::Y;
      const bool z = l == Letter::Z || l == Letter::Y;
      if (x) img = pauli_mul(img, xi);
      if (z) img = pauli_mul(img, zi);
      if (x && z) img = pauli_mul(PauliString(n, 0, 0, 1), img);
    }
    cur = img;
  }
  if (cur.phase_exp() % 2 != 0) throw std::logic_error("conjugate_through_entangler: lost Hermiticity");
  const double sign = cur.phase_exp() == 2 ? -1.0 : 1.0;
  return {sign, PauliString(n, cur.x_bits(), cur.z_bits(), 0)};
}

/// Parameter-shift gradients restricted to the exact simulation cone of one
/// (spec, observable) pair. Gates outside the cone commute past everything
/// later and cancel in U^dag O U, so only the cone is simulated; slots outside
/// it have gradient exactly 0. The cone is further split into qubit components
/// that no active gate or entangler pair connects: the state stays a product
/// across them, so each is simulated alone and the expectations multiply.
class GradientKernel {
 public:
  GradientKernel(std::shared_ptr<const CircuitSpec> spec, const PauliString& observable)
      : GradientKernel(spec, conjugate_last_layer(*spec, observable)) {}

  const LightCone& cone() const { return cone_; }
  /// Sign picked up by the observable in the final entangler layer.
  double observable_sign() const { return sign_; }

 private:
  using Absorbed = std::pair<double, PauliString>;

  static Absorbed conjugate_last_layer(const CircuitSpec& spec, const PauliString& observable) {
    if (!observable.hermitian()) throw std::invalid_argument("GradientKernel: observable must be Hermitian");
    if (observable.n_sites() != spec.n) throw std::invalid_argument("GradientKernel: observable size mismatch");
    return conjugate_through_entangler(observable, spec.entangler_pattern());
  }

  // The final entangler layer is folded into the observable, which leaves the
  // cone to the rotations of that layer.
  GradientKernel(std::shared_ptr<const CircuitSpec> spec, const Absorbed& absorbed)
      : spec_(std::move(spec)),
        sign_(absorbed.first),
        cone_(*spec_, absorbed.second, /*exclude_trailing_entangler=*/true) {
    const PauliString& observable = absorbed.second;
    const std::size_t n = spec_->n;
    const std::uint64_t qbits = cone_.qubit_bits();
    const auto in_cone_q = [&](std::size_t q) { return (qbits >> (n - 1 - q)) & 1; };

    // Union-find over cone qubits.
    std::vector<std::size_t> parent(n);
    for (std::size_t q = 0; q < n; ++q) parent[q] = q;
    const auto find = [&](std::size_t q) {
      while (parent[q] != q) q = parent[q] = parent[parent[q]];
      return q;
    };
    const auto unite = [&](std::size_t a, std::size_t b) { parent[find(a)] = find(b); };
    for (std::size_t slot = 0; slot < spec_->slot_count(); ++slot) {
      if (!cone_.in_cone(slot) || !spec_->is_active(slot)) continue;
      const BlockSupport blk = spec_->block_of(slot);
      for (std::size_t q = blk.offset + 1; q < blk.offset + blk.width; ++q) unite(blk.offset, q);
    }
    for (std::size_t layer = 0; layer < spec_->l; ++layer) {
      for (const auto& [a, b] : cone_.even_pairs(layer)) unite(a, b);
      for (const auto& [a, b] : cone_.odd_pairs(layer)) unite(a, b);
    }

    comp_of_.assign(n, kNone);
    rank_.assign(n, kNone);
    std::vector<std::size_t> root_comp(n, kNone);
    for (std::size_t q = 0; q < n; ++q) {
      if (!in_cone_q(q)) continue;
      const std::size_t r = find(q);
      if (root_comp[r] == kNone) {
        root_comp[r] = comps_.size();
        comps_.emplace_back();
      }
      Component& c = comps_[root_comp[r]];
      comp_of_[q] = root_comp[r];
      rank_[q] = c.qubits.size();
      c.qubits.push_back(q);
    }
    for (std::size_t ci = 0; ci < comps_.size(); ++ci) {
      Component& c = comps_[ci];
      nq_ = std::max(nq_, c.qubits.size());
      if (c.qubits.size() > kMaxStateQubits) throw std::invalid_argument("GradientKernel: light cone component exceeds 24 qubits");
      c.observable = compress(observable, ci, /*restrict_to_component=*/true);
      auto patterns = std::make_shared<std::vector<EntanglerPattern>>();
      for (std::size_t layer = 0; layer < spec_->l; ++layer) {
        patterns->emplace_back(spec_->entangler, c.qubits.size(), remap(cone_.even_pairs(layer), ci),
                               remap(cone_.odd_pairs(layer), ci));
      }
      c.patterns = std::move(patterns);
    }
  }

 public:
  /// Largest register simulated for one gradient.
  std::size_t simulated_qubits() const { return nq_; }
  std::size_t component_count() const { return comps_.size(); }

  double gradient(const CircuitInstance& inst, std::size_t k) const {
    const std::size_t idx = inst.require_index(k);
    if (comps_.empty() || !cone_.in_cone(k)) return 0.0;
    const std::size_t ck = comp_of_[spec_->block_of(k).offset];
    if (comps_[ck].observable.is_identity()) return 0.0;
    double rest = 1.0;
    for (std::size_t ci = 0; ci < comps_.size(); ++ci) {
      if (ci == ck || comps_[ci].observable.is_identity()) continue;
      Program prog = component_program(inst, ci, kNone, idx);
      rest *= prog.run().expectation(comps_[ci].observable);
      if (rest == 0.0) return 0.0;
    }
    std::size_t cut = 0;
    Program prog = component_program(inst, ck, k, idx, &cut);
    StateVector minus = init_state(prog.n, prog.init);
    prog.run(minus, 0, cut);
    StateVector plus = minus;
    const double theta = prog.ops[cut].angle;
    prog.ops[cut].angle = theta + std::numbers::pi / 2;
    prog.run(plus, cut, prog.ops.size());
    prog.ops[cut].angle = theta - std::numbers::pi / 2;
    prog.run(minus, cut, prog.ops.size());
    const PauliString& o = comps_[ck].observable;
    return 0.5 * (plus.expectation(o) - minus.expectation(o)) * rest * sign_;
  }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  struct Component {
    std::vector<std::size_t> qubits;
    PauliString observable;
    std::shared_ptr<const std::vector<EntanglerPattern>> patterns;
  };

  /// Gates of component `ci` in applied order. When `k` is set, slot k is moved to
  /// the end of its layer's rotations (blocks of a layer are disjoint) and its
  /// position is written to `cut`.
  Program component_program(const CircuitInstance& inst, std::size_t ci, std::size_t k, std::size_t k_idx,
                            std::size_t* cut = nullptr) const {
    const Component& c = comps_[ci];
    Program prog;
    prog.n = c.qubits.size();
    prog.init = spec_->init_kind;
    prog.patterns = c.patterns;
    const std::size_t k_layer = k == kNone ? kNone : spec_->layer_of(k);
    std::size_t i = 0;
    for (std::size_t layer = 0; layer < spec_->l; ++layer) {
      for (; i < inst.slots.size() && spec_->layer_of(inst.slots[i]) == layer; ++i) {
        const std::size_t slot = inst.slots[i];
        if (slot == k || !cone_.in_cone(slot) || comp_of_[spec_->block_of(slot).offset] != ci) continue;
        prog.ops.push_back(rotation(slot, inst.generators.generators[i], inst.params.angles[i], ci));
      }
      if (layer == k_layer) {
        *cut = prog.ops.size();
        prog.ops.push_back(rotation(k, inst.generators.generators[k_idx], inst.params.angles[k_idx], ci));
      }
      if (!(*c.patterns)[layer].empty()) {
        GateOp op;
        op.kind = GateOp::Kind::entangler;
        op.pattern = layer;
        prog.ops.push_back(std::move(op));
      }
    }
    return prog;
  }

  GateOp rotation(std::size_t slot, const PauliString& g, double angle, std::size_t ci) const {
    GateOp op;
    op.kind = GateOp::Kind::rotation;
    op.slot = slot;
    op.generator = compress(g, ci, /*restrict_to_component=*/false);
    op.angle = angle;
    return op;
  }

  PauliString compress(const PauliString& p, std::size_t ci, bool restrict_to_component) const {
    const std::size_t n = spec_->n;
    const std::size_t m = comps_[ci].qubits.size();
    std::uint64_t x = 0;
    std::uint64_t z = 0;
    for (std::size_t q = 0; q < n; ++q) {
      const std::uint64_t src = std::uint64_t{1} << (n - 1 - q);
      if (!(p.support_bits() & src)) continue;
      if (comp_of_[q] != ci) {
        if (restrict_to_component) continue;
        throw std::logic_error("GradientKernel: generator leaves its component");
      }
      const std::uint64_t dst = std::uint64_t{1} << (m - 1 - rank_[q]);
      if (p.x_bits() & src) x |= dst;
      if (p.z_bits() & src) z |= dst;
    }
    return PauliString(m, x, z, p.phase_exp());
  }

  std::vector<EntanglerPattern::Pair> remap(const std::vector<EntanglerPattern::Pair>& pairs, std::size_t ci) const {
    std::vector<EntanglerPattern::Pair> out;
    for (const auto& [a, b] : pairs) {
      if (comp_of_[a] == ci) out.emplace_back(rank_[a], rank_[b]);
    }
    return out;
  }

  std::shared_ptr<const CircuitSpec> spec_;
  double sign_ = 1.0;
  LightCone cone_;
  std::vector<Component> comps_;
  std::vector<std::size_t> comp_of_;
  std::vector<std::size_t> rank_;
  std::size_t nq_ = 0;
};

}  // namespace plateau
