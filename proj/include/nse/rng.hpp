#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace nse {

/// Identifies one independent random stream. The pair fully determines the
/// sequence produced, so work split across threads reproduces serial runs.
struct RngSeed {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  friend bool operator==(const RngSeed&, const RngSeed&) = default;
};

/// Stream layout used by the experiment drivers: one stream per
/// (replication, reference sequence) pair.
constexpr std::uint64_t stream_for(std::uint64_t replication, std::uint64_t sequence) {
  return (replication << 16) + sequence;
}

/// Same seed, different stream.
constexpr RngSeed with_stream(RngSeed s, std::uint64_t stream_id) { return {s.seed, stream_id}; }

/// splitmix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// A fresh key derived from (seed, stream, salt), stream reset to 0. Used when
/// a nested procedure needs its own stream space.
constexpr RngSeed derive_seed(RngSeed s, std::uint64_t salt) {
  return {mix64(mix64(s.seed ^ mix64(s.stream_id)) ^ salt), 0};
}

/// Philox4x32-10 counter-based generator. The key is the 64-bit seed, the upper
/// half of the 128-bit counter is the stream id and the lower half counts
/// blocks, so streams never overlap.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(RngSeed seed);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform on the open interval (0,1), 53-bit resolution.
  double uniform();
  /// Unit exponential.
  double exponential();
  /// Standard normal (Marsaglia polar method).
  double normal();

  /// Jump to an arbitrary block; used by tests to check counter semantics.
  void seek(std::uint64_t block);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> out_{};
  int pos_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// One raw Philox4x32-10 block, exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key);

}  // namespace nse
