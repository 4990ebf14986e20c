#pragma once

#include <cstdint>
#include <random>

namespace metabandit {

/// Seeded random source used everywhere in the library.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Uniform and normal variates are produced by code in this file
/// rather than by <random> distributions, whose algorithms are
/// implementation-defined:
///   - uniform(): top 53 bits of one engine draw, scaled by 2^-53, in [0, 1).
///   - normal(): Marsaglia polar method; the second variate of each accepted
///     pair is cached and returned by the next call.
/// Seeded runs are therefore bit-reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). Uses rejection to avoid modulo bias.
  std::uint64_t below(std::uint64_t n);

  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Counter-based sub-seed: mix64(master + mix64(stream + 1) + counter * golden).
///
/// `stream` separates purposes (training episodes, evaluation, oracle shards,
/// sweep cells) and `counter` indexes items within a stream. The derived seed
/// depends only on (master, stream, counter), never on how work is split
/// between threads.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t counter);

namespace streams {
inline constexpr std::uint64_t kTrainEpisode = 1;
inline constexpr std::uint64_t kInit = 2;
inline constexpr std::uint64_t kEval = 3;
inline constexpr std::uint64_t kOracle = 4;
inline constexpr std::uint64_t kSweepCell = 5;
inline constexpr std::uint64_t kBimodalitySeed = 6;
}  // namespace streams

}  // namespace metabandit
