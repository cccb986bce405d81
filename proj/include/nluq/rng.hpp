#pragma once

// Counter-based random streams (Philox4x32-10, Salmon et al. SC'11).
//
// A Stream is identified by a 64-bit key. Output block i is a pure function
// of (key, i), so streams can be split into independent substreams by
// hashing (key, id) into a new key. Every sampler in the library draws
// per-sample randomness from stream.split(sample_index); results are
// therefore independent of the number of worker threads.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace nluq {

namespace detail {

inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

}  // namespace detail

class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(std::uint64_t key = 0) : key_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (lane_ == 2) {
      refill();
    }
    const std::uint64_t out = (static_cast<std::uint64_t>(block_[2 * lane_]) << 32) |
                              block_[2 * lane_ + 1];
    ++lane_;
    return out;
  }

  // Independent child stream; the parent is left untouched.
  Stream split(std::uint64_t id) const {
    const auto out = detail::philox4x32_10(
        {static_cast<std::uint32_t>(id), static_cast<std::uint32_t>(id >> 32), 0x5EEDu,
         0xC0FFEEu},
        key_words());
    return Stream((static_cast<std::uint64_t>(out[0]) << 32) | out[1]);
  }

  std::uint64_t key() const { return key_; }

 private:
  std::array<std::uint32_t, 2> key_words() const {
    return {static_cast<std::uint32_t>(key_), static_cast<std::uint32_t>(key_ >> 32)};
  }

  void refill() {
    block_ = detail::philox4x32_10(
        {static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32), 0u, 0u},
        key_words());
    ++counter_;
    lane_ = 0;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int lane_ = 2;
};

// Uniform on the open interval (0, 1); never returns 0 or 1.
inline double uniform01(Stream& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

// Named sub-stream tags for the seed hierarchy: master -> subcommand -> sample.
enum class StreamTag : std::uint64_t {
  kSolve = 1,
  kRates = 2,
  kGenData = 3,
  kOracle = 4,
  kMlmc = 5,
  kMlsmc = 6,
  kStudy = 7,
};

inline Stream subcommand_stream(std::uint64_t master_seed, StreamTag tag) {
  return Stream(master_seed).split(static_cast<std::uint64_t>(tag));
}

}  // namespace nluq
