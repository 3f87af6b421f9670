#ifndef CONCEPTSEG_RNG_HPP
#define CONCEPTSEG_RNG_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>

#include "conceptseg/errors.hpp"

namespace conceptseg {

// Deterministic PRNG. std::mt19937_64 is standardized but the std
// distributions are not, so all draws are implemented here and produce
// identical sequences on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(splitmix(seed ^ 0x9e3779b97f4a7c15ULL)) {}

  // Derives an independent stream from (seed, ids...). Used to give every
  // episode / trajectory its own reproducible stream.
  Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) : state_(seed) {
    for (std::uint64_t id : ids) state_ = splitmix(state_ ^ splitmix(id + 0x632be59bd9b4e019ULL));
    state_ = splitmix(state_);
  }

  std::uint64_t next_u64() {
    // xorshift64* on a splitmix-derived state.
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545f4914f6cdd1dULL;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Multiply-shift; deterministic, slight bias
  // negligible for the small n used here.
  int uniform_int(int n) {
    if (n <= 0) throw ContractError("Rng::uniform_int: n must be positive");
    return static_cast<int>((static_cast<unsigned __int128>(next_u64()) *
                             static_cast<unsigned __int128>(n)) >>
                            64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller without caching so the stream position is a pure function of
  // the number of calls.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // CDF scan in index order; ties and rounding resolve identically everywhere.
  int categorical(std::span<const double> probs) {
    double u = uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::uint64_t state_;
};

}  // namespace conceptseg

#endif
