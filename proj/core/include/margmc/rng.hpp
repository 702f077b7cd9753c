#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace margmc {

/// Philox-4x32-10 counter-based generator.
///
/// The key is derived from (seed, stream) so that every chain owns an
/// independent stream; the 128-bit counter advances once per four 32-bit
/// outputs. Satisfies UniformRandomBitGenerator with 64-bit results.
class Philox {
 public:
  using result_type = std::uint64_t;

  explicit Philox(std::uint64_t seed, std::uint64_t stream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()();

  /// Uniform double in the open interval (0, 1), 53 bits of resolution.
  double uniform();

  /// Fresh generator for sub-stream `index` of this generator's key.
  Philox split(std::uint64_t index) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  /// One raw Philox-4x32-10 block for an explicit counter and key.
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> counter,
                                            std::array<std::uint32_t, 2> key);

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::array<std::uint32_t, 2> key_{};
  std::array<std::uint32_t, 4> counter_{};
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace margmc
