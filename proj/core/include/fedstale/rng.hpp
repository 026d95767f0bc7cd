#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace fedstale {

/// Domain-separation tags for keyed random streams.
enum class StreamTag : std::uint64_t {
  kParticipation = 0x7061727469636970ULL,
  kLocalTraining = 0x6c6f63616c747261ULL,
  kDataset = 0x6461746173657421ULL,
  kClassCenters = 0x63656e7465727321ULL,
  kGrouping = 0x67726f7570696e67ULL,
  kProbe = 0x70726f6265732121ULL,
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Folds a seed and a path of integers into a single 64-bit stream key.
std::uint64_t derive_key(std::uint64_t seed,
                         std::initializer_list<std::uint64_t> path);

/// Counter-based random stream. The n-th output is mix64(key + n * gamma), so
/// a stream is fully determined by its key and independent of every other
/// stream in the process. Satisfies UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key) : key_(key) {}
  CounterRng(std::uint64_t seed, std::initializer_list<std::uint64_t> path)
      : key_(derive_key(seed, path)) {}
  CounterRng(std::uint64_t seed, StreamTag tag,
             std::initializer_list<std::uint64_t> path);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal (Box-Muller; the second variate is cached).
  double normal();
  /// Uniform integer in [0, n). Requires n > 0.
  std::uint64_t below(std::uint64_t n);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace fedstale
