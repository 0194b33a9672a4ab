#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace bpre {

// Streams are keyed by (seed, replicate, purpose): replicate i sees the same
// draws no matter which worker runs it or how the work is chunked.
enum class Purpose : std::uint64_t {
  environment = 1,
  population = 2,
  walk = 3,
  chain = 4,
  misc = 5,
};

constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// xoshiro256** seeded from a splitmix64 hash of the stream key. Satisfies
/// UniformRandomBitGenerator so the <random> distributions accept it.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(std::uint64_t seed, std::uint64_t replicate = 0,
                  Purpose purpose = Purpose::misc) noexcept {
    std::uint64_t key = seed;
    std::uint64_t a = splitmix64(key);
    key ^= replicate * 0xd1342543de82ef95ULL + 0x632be59bd9b4e019ULL;
    std::uint64_t b = splitmix64(key);
    key ^= static_cast<std::uint64_t>(purpose) * 0xa0761d6478bd642fULL;
    std::uint64_t mixed = a ^ (b << 1) ^ splitmix64(key);
    for (auto& word : s_) word = splitmix64(mixed);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

}  // namespace bpre
