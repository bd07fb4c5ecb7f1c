// Seeded RNG helpers. All draws go through mt19937_64 with explicit modulo
// reduction so outputs are identical across platforms (the std distribution
// classes are implementation-defined).

#ifndef SEQTAG_RNG_HPP
#define SEQTAG_RNG_HPP

#include <cstdint>
#include <random>
#include <vector>

namespace seqtag {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  // Uniform in [0, n); modulo bias is acceptable here.
  std::uint64_t below(std::uint64_t n) { return gen_() % n; }

  // Uniform double in [0, 1).
  double unit() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  // Derive an independent stream, e.g. per fold or per iteration.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t x = seed ^ (salt * 0x9e3779b97f4a7c15ull);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace seqtag

#endif  // SEQTAG_RNG_HPP
