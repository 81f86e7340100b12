#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace cadenza {

// Counter-free 64-bit generator (xoshiro256**) with hand-written
// distributions so that sequences are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Named-stream splitter: every consumer of randomness derives its own
// independent generator from (root seed, stream name, index), so adding a
// new consumer never perturbs an existing stream.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t index = 0);

inline Rng stream(std::uint64_t root, std::string_view name, std::uint64_t index = 0) {
  return Rng(derive_seed(root, name, index));
}

namespace streams {
inline constexpr std::string_view kBatch = "batch";
inline constexpr std::string_view kDropout = "dropout";
inline constexpr std::string_view kInit = "init";
inline constexpr std::string_view kSynth = "synth";
inline constexpr std::string_view kSeeds = "seeds";
inline constexpr std::string_view kBootstrap = "bootstrap";
inline constexpr std::string_view kPermute = "permute";
inline constexpr std::string_view kPlan = "plan";
}  // namespace streams

}  // namespace cadenza
