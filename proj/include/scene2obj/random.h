// Counter-based random streams.
//
// A stream is identified by (seed, key...) and produces the same sequence no
// matter which thread draws from it or in what order streams are visited.

#ifndef SCENE2OBJ_RANDOM_H_
#define SCENE2OBJ_RANDOM_H_

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace scene2obj {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix_keys(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

// UniformRandomBitGenerator over splitmix64(key + counter).
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t stream_key) : key_(stream_key) {}
  CounterRng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys)
      : key_(mix_keys(seed, keys)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return splitmix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace scene2obj

#endif  // SCENE2OBJ_RANDOM_H_
