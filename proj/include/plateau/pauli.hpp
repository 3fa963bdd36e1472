#pragma once

// Pauli strings stored as (x, z) bit masks plus a power-of-i phase.
//
// Qubit convention used across the library: qubit 0 is the MOST significant
// bit of an amplitude index. A string on n qubits keeps qubit q in mask bit
// (n - 1 - q), so masks can be applied to amplitude indices directly.

#include <array>
#include <bit>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace plateau {

using cplx = std::complex<double>;

enum class Letter : std::uint8_t { I = 0, X = 1, Y = 2, Z = 3 };

inline constexpr std::size_t kMaxPauliQubits = 64;

/// i^k for k in {0,1,2,3}.
inline constexpr cplx ipow(unsigned k) {
  switch (k & 3u) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, 1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, -1.0};
  }
}

class PauliString {
 public:
  PauliString() = default;

  /// Identity on n qubits.
  explicit PauliString(std::size_t n_sites) : n_(n_sites) {
    if (n_sites == 0 || n_sites > kMaxPauliQubits) {
      throw std::invalid_argument("PauliString: n_sites must be in [1, 64]");
    }
  }

  PauliString(std::size_t n_sites, std::uint64_t x_bits, std::uint64_t z_bits, unsigned phase_exp = 0)
      : PauliString(n_sites) {
    const std::uint64_t m = full_mask();
    if ((x_bits & ~m) != 0 || (z_bits & ~m) != 0) {
      throw std::invalid_argument("PauliString: mask bits beyond n_sites");
    }
    x_ = x_bits;
    z_ = z_bits;
    phase_ = phase_exp & 3u;
  }

  /// Parses "ZZIX" (qubit 0 leftmost) with an optional sign prefix "+", "-", "i", "-i".
  static PauliString parse(std::string_view text) {
    unsigned phase = 0;
    if (text.starts_with("-i")) {
      phase = 3;
      text.remove_prefix(2);
    } else if (text.starts_with("+i")) {
      phase = 1;
      text.remove_prefix(2);
    } else if (text.starts_with('i')) {
      phase = 1;
      text.remove_prefix(1);
    } else if (text.starts_with('-')) {
      phase = 2;
      text.remove_prefix(1);
    } else if (text.starts_with('+')) {
      text.remove_prefix(1);
    }
    if (text.empty()) throw std::invalid_argument("PauliString::parse: empty string");
    PauliString p(text.size());
    for (std::size_t q = 0; q < text.size(); ++q) {
      switch (text[q]) {
        case 'I': case '_': break;
        case 'X': p.set(q, Letter::X); break;
        case 'Y': p.set(q, Letter::Y); break;
        case 'Z': p.set(q, Letter::Z); break;
        default:
          throw std::invalid_argument(std::string("PauliString::parse: bad letter '") + text[q] + "'");
      }
    }
    p.phase_ = phase;
    return p;
  }

  /// Single letter on qubit q, identity elsewhere.
  static PauliString single(std::size_t n_sites, std::size_t q, Letter l) {
    PauliString p(n_sites);
    p.set(q, l);
    return p;
  }

  std::size_t n_sites() const { return n_; }
  std::uint64_t x_bits() const { return x_; }
  std::uint64_t z_bits() const { return z_; }
  unsigned phase_exp() const { return phase_; }
  bool hermitian() const { return phase_ == 0; }

  std::uint64_t full_mask() const { return n_ == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n_) - 1; }
  std::uint64_t bit_of(std::size_t q) const { return std::uint64_t{1} << (n_ - 1 - q); }

  Letter letter(std::size_t q) const {
    check_site(q);
    const bool x = (x_ & bit_of(q)) != 0;
    const bool z = (z_ & bit_of(q)) != 0;
    if (x && z) return Letter::Y;
    if (x) return Letter::X;
    if (z) return Letter::Z;
    return Letter::I;
  }

  void set(std::size_t q, Letter l) {
    check_site(q);
    const std::uint64_t b = bit_of(q);
    x_ &= ~b;
    z_ &= ~b;
    if (l == Letter::X || l == Letter::Y) x_ |= b;
    if (l == Letter::Z || l == Letter::Y) z_ |= b;
  }

  /// Mask of non-identity sites (amplitude-bit order).
  std::uint64_t support_bits() const { return x_ | z_; }
  std::size_t weight() const { return static_cast<std::size_t>(std::popcount(support_bits())); }
  bool is_identity() const { return support_bits() == 0; }
  std::size_t y_count() const { return static_cast<std::size_t>(std::popcount(x_ & z_)); }

  bool supported_on(std::uint64_t allowed_bits) const { return (support_bits() & ~allowed_bits) == 0; }

  std::string str() const {
    static constexpr std::array<char, 4> kChars{'I', 'X', 'Y', 'Z'};
    std::string out;
    switch (phase_) {
      case 1: out = "i"; break;
      case 2: out = "-"; break;
      case 3: out = "-i"; break;
      default: break;
    }
    for (std::size_t q = 0; q < n_; ++q) out.push_back(kChars[static_cast<std::size_t>(letter(q))]);
    return out;
  }

  friend bool operator==(const PauliString&, const PauliString&) = default;

 private:
  void check_site(std::size_t q) const {
    if (q >= n_) throw std::out_of_range("PauliString: qubit index out of range");
  }

  std::size_t n_ = 0;
  std::uint64_t x_ = 0;
  std::uint64_t z_ = 0;
  unsigned phase_ = 0;
};

namespace detail {

inline void require_same_size(const PauliString& p, const PauliString& q, const char* what) {
  if (p.n_sites() != q.n_sites()) throw std::invalid_argument(std::string(what) + ": size mismatch");
}

// Phase exponent of sigma_a * sigma_b for single-site letters: XY = iZ, YZ = iX, ZX = iY.
inline constexpr unsigned letter_product_phase(Letter a, Letter b) {
  if (a == Letter::I || b == Letter::I || a == b) return 0;
  const int da = static_cast<int>(a);
  const int db = static_cast<int>(b);
  // Cyclic order X(1) -> Y(2) -> Z(3) -> X gives +i.
  return ((db - da + 3) % 3 == 1) ? 1u : 3u;
}

}  // namespace detail

/// Pauli group product p * q with full phase tracking.
inline PauliString pauli_mul(const PauliString& p, const PauliString& q) {
  detail::require_same_size(p, q, "pauli_mul");
  unsigned phase = p.phase_exp() + q.phase_exp();
  for (std::size_t s = 0; s < p.n_sites(); ++s) phase += detail::letter_product_phase(p.letter(s), q.letter(s));
  return PauliString(p.n_sites(), p.x_bits() ^ q.x_bits(), p.z_bits() ^ q.z_bits(), phase & 3u);
}

inline bool commutes(const PauliString& p, const PauliString& q) {
  detail::require_same_size(p, q, "commutes");
  const std::uint64_t anti = (p.x_bits() & q.z_bits()) ^ (p.z_bits() & q.x_bits());
  return std::popcount(anti) % 2 == 0;
}

/// out = P * in. Amplitude j maps to j ^ x with factor i^(phase + #Y) * (-1)^popcount(j & z).
inline void apply_pauli_into(const PauliString& p, std::span<const cplx> in, std::span<cplx> out) {
  const std::size_t dim = in.size();
  if (dim != (std::size_t{1} << p.n_sites()) || out.size() != dim) {
    throw std::invalid_argument("apply_pauli: size mismatch");
  }
  const std::uint64_t x = p.x_bits();
  const std::uint64_t z = p.z_bits();
  const cplx w = ipow(p.phase_exp() + static_cast<unsigned>(p.y_count()));
  for (std::uint64_t j = 0; j < dim; ++j) {
    const double sgn = (std::popcount(j & z) & 1) ? -1.0 : 1.0;
    out[j ^ x] = w * sgn * in[j];
  }
}

}  // namespace plateau
