#pragma once

// Layered ansatz of s-qubit Pauli rotation blocks followed by a fixed entangler
// per layer. Slot k sits in layer k / (n/s), block k % (n/s), and acts on qubits
// [block*s, block*s + s).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "plateau/dense.hpp"
#include "plateau/pauli.hpp"
#include "plateau/random.hpp"
#include "plateau/state.hpp"

namespace plateau {

enum class GeneratorPolicy { full_minus_identity, full, xyz_only };

inline std::string_view to_string(GeneratorPolicy p) {
  switch (p) {
    case GeneratorPolicy::full_minus_identity: return "full_minus_identity";
    case GeneratorPolicy::full: return "full";
    default: return "xyz_only";
  }
}

inline GeneratorPolicy parse_generator_policy(std::string_view s) {
  if (s == "full_minus_identity") return GeneratorPolicy::full_minus_identity;
  if (s == "full") return GeneratorPolicy::full;
  if (s == "xyz_only") return GeneratorPolicy::xyz_only;
  throw std::invalid_argument("unknown generator policy '" + std::string(s) + "'");
}

enum class ThetaDist { uniform_0_2pi };

struct CircuitSpec {
  std::size_t n = 1;
  std::size_t l = 1;
  std::size_t s = 1;
  EntanglerKind entangler = EntanglerKind::cz_brick;
  GeneratorPolicy generator_policy = GeneratorPolicy::full_minus_identity;
  InitKind init_kind = InitKind::zeros;
  ThetaDist theta_dist = ThetaDist::uniform_0_2pi;
  std::vector<bool> active_mask;  // one entry per slot; empty means "all active" until validated

  static CircuitSpec make(std::size_t n, std::size_t l, std::size_t s,
                          EntanglerKind entangler = EntanglerKind::cz_brick,
                          GeneratorPolicy policy = GeneratorPolicy::full_minus_identity,
                          InitKind init = InitKind::zeros) {
    CircuitSpec spec;
    spec.n = n;
    spec.l = l;
    spec.s = s;
    spec.entangler = entangler;
    spec.generator_policy = policy;
    spec.init_kind = init;
    if (s == 0 || n == 0 || n % s != 0) throw std::invalid_argument("CircuitSpec: s must divide n");
    spec.active_mask.assign(n * l / s, true);
    spec.validate();
    return spec;
  }

  std::size_t blocks_per_layer() const { return n / s; }
  std::size_t slot_count() const { return n * l / s; }
  std::size_t layer_of(std::size_t slot) const { return slot / blocks_per_layer(); }
  BlockSupport block_of(std::size_t slot) const { return {(slot % blocks_per_layer()) * s, s}; }
  bool is_active(std::size_t slot) const { return active_mask.at(slot); }

  std::size_t active_count() const {
    return static_cast<std::size_t>(std::count(active_mask.begin(), active_mask.end(), true));
  }

  std::vector<std::size_t> active_slots() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < active_mask.size(); ++k) {
      if (active_mask[k]) out.push_back(k);
    }
    return out;
  }

  EntanglerPattern entangler_pattern() const { return EntanglerPattern(entangler, n); }

  void validate() const {
    if (n == 0 || n > kMaxPauliQubits) throw std::invalid_argument("CircuitSpec.n: must be in [1, 64]");
    if (l == 0) throw std::invalid_argument("CircuitSpec.l: must be positive");
    if (s == 0 || n % s != 0) throw std::invalid_argument("CircuitSpec.s: must divide n");
    if (active_mask.size() != slot_count()) {
      throw std::invalid_argument("CircuitSpec.active_mask: length must equal n*l/s = " + std::to_string(slot_count()));
    }
    if (generator_policy == GeneratorPolicy::xyz_only && s != 1) {
      throw std::invalid_argument("CircuitSpec.generator_policy: xyz_only requires s = 1");
    }
  }

  friend bool operator==(const CircuitSpec&, const CircuitSpec&) = default;
};

inline std::size_t parameter_count(const CircuitSpec& spec) { return spec.n * spec.l / spec.s; }

/// Number of generators the policy draws from for a block of width s.
inline std::size_t generator_set_size(GeneratorPolicy policy, std::size_t s) {
  const std::size_t full = std::size_t{1} << (2 * s);
  switch (policy) {
    case GeneratorPolicy::full: return full;
    case GeneratorPolicy::full_minus_identity: return full - 1;
    default: return 3;
  }
}

/// The r-th generator of the policy set on `block`. For the full sets, r is read
/// as base-4 digits (I=0, X=1, Y=2, Z=3) with the block's first qubit most significant.
inline PauliString generator_from_index(std::size_t n, const BlockSupport& block, GeneratorPolicy policy,
                                        std::size_t r) {
  if (r >= generator_set_size(policy, block.width)) throw std::out_of_range("generator_from_index: index");
  PauliString p(n);
  if (policy == GeneratorPolicy::xyz_only) {
    p.set(block.offset, static_cast<Letter>(r + 1));
    return p;
  }
  std::size_t code = policy == GeneratorPolicy::full_minus_identity ? r + 1 : r;
  for (std::size_t i = 0; i < block.width; ++i) {
    const std::size_t q = block.offset + block.width - 1 - i;
    p.set(q, static_cast<Letter>(code & 3u));
    code >>= 2;
  }
  return p;
}

/// Every generator in the policy set on `block`, in index order.
inline std::vector<PauliString> generator_set(std::size_t n, const BlockSupport& block, GeneratorPolicy policy) {
  std::vector<PauliString> out;
  const std::size_t m = generator_set_size(policy, block.width);
  out.reserve(m);
  for (std::size_t r = 0; r < m; ++r) out.push_back(generator_from_index(n, block, policy, r));
  return out;
}

struct GeneratorAssignment {
  std::vector<PauliString> generators;  // one per active slot, slot order
};

struct ParameterVector {
  std::vector<double> angles;  // one per active slot, slot order
};

/// A concrete circuit: spec plus generators and angles for every active slot.
struct CircuitInstance {
  std::shared_ptr<const CircuitSpec> spec;
  std::vector<std::size_t> slots;  // active slot indices, ascending
  GeneratorAssignment generators;
  ParameterVector params;

  CircuitInstance() = default;

  CircuitInstance(std::shared_ptr<const CircuitSpec> s, GeneratorAssignment g, ParameterVector p)
      : spec(std::move(s)), slots(spec->active_slots()), generators(std::move(g)), params(std::move(p)) {
    if (generators.generators.size() != slots.size() || params.angles.size() != slots.size()) {
      throw std::invalid_argument("CircuitInstance: generator/angle count must equal active slot count");
    }
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const auto& g = generators.generators[i];
      if (g.n_sites() != spec->n) throw std::invalid_argument("CircuitInstance: generator size mismatch");
      if (!g.hermitian()) throw std::invalid_argument("CircuitInstance: generator must be Hermitian");
      if (!g.supported_on(spec->block_of(slots[i]).bits(spec->n))) {
        throw std::invalid_argument("CircuitInstance: generator support leaves its block");
      }
    }
  }

  /// Position of `slot` among the active slots, or nullopt if inactive.
  std::optional<std::size_t> index_of(std::size_t slot) const {
    const auto it = std::lower_bound(slots.begin(), slots.end(), slot);
    if (it == slots.end() || *it != slot) return std::nullopt;
    return static_cast<std::size_t>(it - slots.begin());
  }

  std::size_t require_index(std::size_t slot) const {
    const auto idx = index_of(slot);
    if (!idx) throw std::invalid_argument("slot " + std::to_string(slot) + " is not an active parameter");
    return *idx;
  }

  /// Copy with the angle at `slot` replaced.
  CircuitInstance with_angle(std::size_t slot, double theta) const {
    CircuitInstance c = *this;
    c.params.angles[require_index(slot)] = theta;
    return c;
  }
};

/// Draws generator then angle for each active slot, in slot order.
inline CircuitInstance sample_instance(std::shared_ptr<const CircuitSpec> spec, RandomStream& stream) {
  GeneratorAssignment g;
  ParameterVector p;
  const std::size_t m = generator_set_size(spec->generator_policy, spec->s);
  for (std::size_t k = 0; k < spec->slot_count(); ++k) {
    if (!spec->active_mask[k]) continue;
    const auto r = static_cast<std::size_t>(stream.below(m));
    g.generators.push_back(generator_from_index(spec->n, spec->block_of(k), spec->generator_policy, r));
    p.angles.push_back(stream.angle());
  }
  return CircuitInstance(std::move(spec), std::move(g), std::move(p));
}

inline CircuitInstance sample_instance(const CircuitSpec& spec, RandomStream& stream) {
  return sample_instance(std::make_shared<const CircuitSpec>(spec), stream);
}

/// Deactivates floor(fraction * slots) slots chosen uniformly (partial Fisher-Yates).
inline CircuitSpec prune(const CircuitSpec& spec, double fraction, RandomStream& stream) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw std::invalid_argument("prune: fraction must be in [0, 1]");
  CircuitSpec out = spec;
  const std::size_t total = spec.slot_count();
  const auto drop = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(total) + 1e-9));
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < drop; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(stream.below(total - i));
    std::swap(order[i], order[j]);
    out.active_mask[order[i]] = false;
  }
  return out;
}

/// Backward light cone of an observable through the ansatz structure.
///
/// Layers are swept last to first. Within a layer the applied order is
/// rotations, even entangler column, odd entangler column, so going backward the
/// support set S first grows through the odd then the even column (a pair joins
/// S if either member is in S), and then every block that meets S is in the cone
/// and adds its whole block to S.
class LightCone {
 public:
  /// With `exclude_trailing_entangler`, the final layer's entangler is ignored; callers
  /// use this after conjugating the observable through that layer themselves.
  LightCone(const CircuitSpec& spec, const PauliString& observable, bool exclude_trailing_entangler = false)
      : n_(spec.n) {
    spec.validate();
    if (observable.n_sites() != spec.n) throw std::invalid_argument("LightCone: observable size mismatch");
    const EntanglerPattern pattern = spec.entangler_pattern();
    slot_in_cone_.assign(spec.slot_count(), false);
    even_.assign(spec.l, {});
    odd_.assign(spec.l, {});
    std::uint64_t support = observable.support_bits();
    const auto bit = [&](std::size_t q) { return std::uint64_t{1} << (spec.n - 1 - q); };
    auto grow = [&](const std::vector<EntanglerPattern::Pair>& column, std::vector<EntanglerPattern::Pair>& kept) {
      for (const auto& [a, b] : column) {
        const std::uint64_t pb = bit(a) | bit(b);
        if (support & pb) {
          kept.emplace_back(a, b);
          support |= pb;
        }
      }
    };
    if (support != 0) {
      for (std::size_t layer = spec.l; layer-- > 0;) {
        if (!(exclude_trailing_entangler && layer + 1 == spec.l)) {
          grow(pattern.odd_column(), odd_[layer]);
          grow(pattern.even_column(), even_[layer]);
        }
        for (std::size_t b = 0; b < spec.blocks_per_layer(); ++b) {
          const std::size_t slot = layer * spec.blocks_per_layer() + b;
          const std::uint64_t bb = spec.block_of(slot).bits(spec.n);
          if (support & bb) {
            slot_in_cone_[slot] = true;
            support |= bb;
          }
        }
      }
    }
    qubit_bits_ = support;
    for (std::size_t k = 0; k < slot_in_cone_.size(); ++k) {
      if (slot_in_cone_[k] && spec.active_mask[k]) effective_.push_back(k);
    }
  }

  bool in_cone(std::size_t slot) const { return slot_in_cone_.at(slot); }
  /// Effective slots: in the cone and active.
  const std::vector<std::size_t>& effective() const { return effective_; }
  /// Qubits touched by anything in the cone (amplitude-bit order).
  std::uint64_t qubit_bits() const { return qubit_bits_; }
  /// Entangler pairs inside the cone, per layer.
  const std::vector<EntanglerPattern::Pair>& even_pairs(std::size_t layer) const { return even_.at(layer); }
  const std::vector<EntanglerPattern::Pair>& odd_pairs(std::size_t layer) const { return odd_.at(layer); }

 private:
  std::size_t n_;
  std::vector<bool> slot_in_cone_;
  std::vector<std::vector<EntanglerPattern::Pair>> even_;
  std::vector<std::vector<EntanglerPattern::Pair>> odd_;
  std::uint64_t qubit_bits_ = 0;
  std::vector<std::size_t> effective_;
};

inline std::vector<std::size_t> effective_parameters(const CircuitSpec& spec, const PauliString& observable) {
  return LightCone(spec, observable).effective();
}

inline std::size_t n_eff(const CircuitSpec& spec, const PauliString& observable) {
  return effective_parameters(spec, observable).size();
}

}  // namespace plateau
