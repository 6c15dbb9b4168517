#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace trajselect::rng {

// splitmix64 finalizer. Also used as the stream transition function, so a
// Stream is just a counter walked through this mix.
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s);

// Independent stream key from (seed, purpose, indices). Streams with distinct
// keys never share state, so parallel producers can draw in any order without
// changing results.
std::uint64_t derive_key(std::uint64_t seed, std::string_view purpose,
                         std::uint64_t a = 0, std::uint64_t b = 0,
                         std::uint64_t c = 0);

// Deterministic counter-based generator. The standard library distributions
// are implementation-defined, so all sampling is spelled out here.
class Stream {
 public:
  explicit Stream(std::uint64_t key) : state_(key) {}

  std::uint64_t next_u64() {
    state_ += kGolden;
    return mix64(state_);
  }

  // Uniform in [0, 1), 53-bit mantissa.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the second draw is cached.
  double next_normal();

  // Uniform in [0, n), unbiased via rejection. n >= 1.
  std::uint64_t next_below(std::uint64_t n);

  // Uniform integer in [lo, hi], inclusive.
  int next_int(int lo, int hi);

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Fisher-Yates driven by the stream.
template <typename T>
void shuffle(std::vector<T>& values, Stream& stream) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const std::size_t j =
        static_cast<std::size_t>(stream.next_below(static_cast<std::uint64_t>(i)));
    using std::swap;
    swap(values[i - 1], values[j]);
  }
}

}  // namespace trajselect::rng
