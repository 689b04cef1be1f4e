#pragma once
#include <cmath>
#include <cstdint>
#include <random>

#include "dft/types.hpp"

namespace dft {

// Fixed substream ids. A run owns one seed; every consumer gets its own
// (seed, stream) pair so adding draws in one phase never shifts another.
namespace stream {
constexpr uint64_t sampler_init = 1;
constexpr uint64_t score_init = 2;
constexpr uint64_t latent = 3;
constexpr uint64_t noise = 4;
constexpr uint64_t minibatch = 5;
constexpr uint64_t eval = 6;
constexpr uint64_t chain = 7;
constexpr uint64_t data_split = 8;
constexpr uint64_t verify = 9;
}  // namespace stream

// Seeded generator with named substreams. Gaussians go through an explicit
// Box-Muller pair (with a cached spare) instead of std::normal_distribution,
// whose output is implementation-defined; mt19937_64 itself is fully
// specified, so streams are bit-stable across standard libraries.
class Prng {
 public:
  explicit Prng(uint64_t seed, uint64_t stream = 0)
      : seed_(seed),
        stream_(stream),
        gen_(mix(seed + 0x9e3779b97f4a7c15ull) ^ mix(stream + 0x6a09e667f3bcc909ull)) {}

  uint64_t next_u64() { return gen_(); }

  // uniform on [0,1), 53-bit resolution
  double uniform() { return double(next_u64() >> 11) * 0x1p-53; }

  // uniform integer in [0,n), rejection sampling so there is no modulo bias
  uint64_t uniform_u64(uint64_t n) {
    uint64_t threshold = (0 - n) % n;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0,1], keeps the log finite
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double t = 2.0 * kPi * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
  }

  // fill order is row-major by contract; checkpointed runs depend on it
  Mat normal_mat(int rows, int cols) {
    Mat m(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = normal();
    return m;
  }

  Vec normal_vec(int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  // independent derived stream, e.g. one per repeat or per chain
  Prng child(uint64_t k) const {
    return Prng(seed_, mix(stream_ * 0x9e3779b97f4a7c15ull + k + 1));
  }

  uint64_t seed() const { return seed_; }
  uint64_t stream() const { return stream_; }

 private:
  static constexpr double kPi = 3.14159265358979323846;

  // splitmix64 finalizer
  static uint64_t mix(uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  uint64_t seed_;
  uint64_t stream_;
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dft
