// SPDX-License-Identifier: Apache-2.0
//
// Numeric formats, the fixed-point codec, bit-flip mutation and the clip
// primitive shared by the engine and the restriction pass.
#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <string_view>

#include "ranger/error.hpp"

namespace ranger {

/// Raw storage bits of one element. Fixed-point values occupy the low
/// `total_bits` bits in two's complement; float32 values are IEEE-754 bits.
using RawBits = std::uint32_t;

struct NumericFormat {
  enum class Kind : std::uint8_t { Float32, Fixed };

  Kind kind = Kind::Float32;
  int total_bits = 32;
  int frac_bits = 0;

  static constexpr NumericFormat float32() { return {Kind::Float32, 32, 0}; }
  static constexpr NumericFormat fixed(int total, int frac) { return {Kind::Fixed, total, frac}; }
  /// Q13.2 plus sign: 14 integer bits and 2 fractional bits.
  static constexpr NumericFormat fixed16(int frac = 2) { return fixed(16, frac); }
  /// Q21.10 plus sign.
  static constexpr NumericFormat fixed32(int frac = 10) { return fixed(32, frac); }

  constexpr bool is_float() const { return kind == Kind::Float32; }
  constexpr bool is_fixed() const { return kind == Kind::Fixed; }
  constexpr int width() const { return total_bits; }

  constexpr std::int64_t min_raw() const { return -(std::int64_t{1} << (total_bits - 1)); }
  constexpr std::int64_t max_raw() const { return (std::int64_t{1} << (total_bits - 1)) - 1; }

  /// Value of one least-significant bit.
  double resolution() const { return is_float() ? 0.0 : std::ldexp(1.0, -frac_bits); }
  double min_value() const {
    return is_float() ? -static_cast<double>(std::numeric_limits<float>::max())
                      : std::ldexp(static_cast<double>(min_raw()), -frac_bits);
  }
  double max_value() const {
    return is_float() ? static_cast<double>(std::numeric_limits<float>::max())
                      : std::ldexp(static_cast<double>(max_raw()), -frac_bits);
  }

  std::string name() const {
    if (is_float()) return "float32";
    if (total_bits == 16 && frac_bits == 2) return "fixed16";
    if (total_bits == 32 && frac_bits == 10) return "fixed32";
    return "fixed" + std::to_string(total_bits) + ":" + std::to_string(frac_bits);
  }

  friend constexpr bool operator==(const NumericFormat&, const NumericFormat&) = default;
};

/// Accepts `float32`, `fixed16`, `fixed32`, or `fixed<total>:<frac>`.
inline NumericFormat parse_format(std::string_view text) {
  if (text == "float32") return NumericFormat::float32();
  if (text == "fixed16") return NumericFormat::fixed16();
  if (text == "fixed32") return NumericFormat::fixed32();
  if (text.starts_with("fixed")) {
    auto rest = text.substr(5);
    auto colon = rest.find(':');
    if (colon != std::string_view::npos) {
      try {
        int total = std::stoi(std::string(rest.substr(0, colon)));
        int frac = std::stoi(std::string(rest.substr(colon + 1)));
        if ((total == 16 || total == 32) && frac >= 0 && frac < total - 1)
          return NumericFormat::fixed(total, frac);
      } catch (const std::exception&) {
      }
    }
  }
  throw Error("unknown numeric format '" + std::string(text) + "'");
}

namespace detail {

/// Round half away from zero.
inline double round_half_away(double x) { return std::round(x); }

}  // namespace detail

/// Saturates a wide integer into the format's raw range.
template <class Int>
constexpr std::int32_t saturate_raw(Int v, NumericFormat fmt) {
  const Int lo = static_cast<Int>(fmt.min_raw());
  const Int hi = static_cast<Int>(fmt.max_raw());
  return static_cast<std::int32_t>(v < lo ? lo : (v > hi ? hi : v));
}

/// Real value to signed fixed-point integer: nearest, ties away from zero,
/// saturating. NaN encodes as zero.
inline std::int32_t to_fixed(double value, NumericFormat fmt) {
  if (std::isnan(value)) return 0;
  const double scaled = detail::round_half_away(std::ldexp(value, fmt.frac_bits));
  if (scaled <= static_cast<double>(fmt.min_raw())) return static_cast<std::int32_t>(fmt.min_raw());
  if (scaled >= static_cast<double>(fmt.max_raw())) return static_cast<std::int32_t>(fmt.max_raw());
  return static_cast<std::int32_t>(scaled);
}

inline double from_fixed(std::int32_t raw, NumericFormat fmt) {
  return std::ldexp(static_cast<double>(raw), -fmt.frac_bits);
}

/// Signed integer to its `total_bits`-wide bit pattern.
constexpr RawBits fixed_to_bits(std::int32_t v, NumericFormat fmt) {
  const auto bits = static_cast<RawBits>(v);
  return fmt.total_bits == 32 ? bits : (bits & ((RawBits{1} << fmt.total_bits) - 1));
}

/// Sign-extends a `total_bits`-wide pattern.
constexpr std::int32_t bits_to_fixed(RawBits bits, NumericFormat fmt) {
  if (fmt.total_bits == 32) return static_cast<std::int32_t>(bits);
  const int shift = 32 - fmt.total_bits;
  return static_cast<std::int32_t>(bits << shift) >> shift;
}

inline RawBits encode(double value, NumericFormat fmt) {
  if (fmt.is_float()) return std::bit_cast<RawBits>(static_cast<float>(value));
  return fixed_to_bits(to_fixed(value, fmt), fmt);
}

inline double decode(RawBits raw, NumericFormat fmt) {
  if (fmt.is_float()) return static_cast<double>(std::bit_cast<float>(raw));
  return from_fixed(bits_to_fixed(raw, fmt), fmt);
}

/// XORs the given bit positions. Positions must be distinct and below the
/// format width.
inline RawBits flip_bits(RawBits value, std::span<const unsigned> positions, NumericFormat fmt) {
  RawBits mask = 0;
  for (unsigned p : positions) {
    if (p >= static_cast<unsigned>(fmt.width()))
      throw Error("bit position " + std::to_string(p) + " out of " + std::to_string(fmt.width()) +
                  "-bit width");
    const RawBits bit = RawBits{1} << p;
    if (mask & bit) throw Error("duplicate bit position " + std::to_string(p));
    mask |= bit;
  }
  return value ^ mask;
}

inline RawBits flip_bits(RawBits value, std::initializer_list<unsigned> positions, NumericFormat fmt) {
  return flip_bits(value, std::span<const unsigned>(positions.begin(), positions.size()), fmt);
}

/// What a range-restriction operator writes for an out-of-bound value.
struct CorrectionPolicy {
  enum class Kind : std::uint8_t { ToBound, ToZero, RandomInRange };

  Kind kind = Kind::ToBound;
  std::uint64_t seed = 0;  // RandomInRange only

  static constexpr CorrectionPolicy to_bound() { return {Kind::ToBound, 0}; }
  static constexpr CorrectionPolicy to_zero() { return {Kind::ToZero, 0}; }
  static constexpr CorrectionPolicy random_in_range(std::uint64_t seed) {
    return {Kind::RandomInRange, seed};
  }

  std::string name() const {
    switch (kind) {
      case Kind::ToBound: return "to-bound";
      case Kind::ToZero: return "to-zero";
      case Kind::RandomInRange: return "random";
    }
    return "?";
  }

  friend constexpr bool operator==(const CorrectionPolicy&, const CorrectionPolicy&) = default;
};

inline CorrectionPolicy parse_policy(std::string_view text, std::uint64_t seed = 0) {
  if (text == "to-bound") return CorrectionPolicy::to_bound();
  if (text == "to-zero") return CorrectionPolicy::to_zero();
  if (text == "random") return CorrectionPolicy::random_in_range(seed);
  throw Error("unknown correction policy '" + std::string(text) + "'");
}

/// Range restriction of one value. NaN passes through unchanged.
template <class Generator>
double clip(double value, double low, double up, const CorrectionPolicy& policy, Generator& rng) {
  if (low > up) throw Error("clip bounds inverted: low > up");
  const bool below = value < low;
  const bool above = value > up;
  if (!below && !above) return value;
  switch (policy.kind) {
    case CorrectionPolicy::Kind::ToBound: return below ? low : up;
    case CorrectionPolicy::Kind::ToZero: return 0.0;
    case CorrectionPolicy::Kind::RandomInRange:
      return std::uniform_real_distribution<double>(low, up)(rng);
  }
  return value;
}

/// Deterministic policies only; RandomInRange needs a generator.
inline double clip(double value, double low, double up, const CorrectionPolicy& policy) {
  if (policy.kind == CorrectionPolicy::Kind::RandomInRange)
    throw Error("random-in-range clip requires a generator");
  std::minstd_rand unused;
  return clip(value, low, up, policy, unused);
}

}  // namespace ranger
