#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace alioth {

// Bad input, bad configuration, or a contract violation by the caller.
// The CLI maps this to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Divergence, NaN losses and similar. The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

// Derives an independent stream from a base seed and a tag, so that
// parallel tasks never share generator state.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_tag(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Uniform double in [0, 1) built from raw engine output. Used instead of
// std::uniform_real_distribution where bit-stable sequences matter.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

// Standard normal via Box-Muller on uniform01, stable across standard
// library implementations.
double standard_normal(Rng& rng);

// Sources of interference in their fixed order.
enum class SoIKind : int { LLC = 0, MBW = 1, NBW = 2, DBW = 3 };
inline constexpr int kNumSoI = 4;
inline constexpr std::array<SoIKind, kNumSoI> kAllSoI = {SoIKind::LLC, SoIKind::MBW,
                                                         SoIKind::NBW, SoIKind::DBW};

std::string_view soi_name(SoIKind k);
SoIKind soi_from_name(std::string_view name);

using SoIVector = std::array<double, kNumSoI>;

// Shortest round-trip decimal representation.
std::string format_double(double v);
double parse_double(std::string_view s);

}  // namespace alioth
