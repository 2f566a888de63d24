#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace mmdopt {

// SplitMix64 finalizer; used to mix (master seed, tag...) into substream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a master seed and a list of tags
// (trial index, epoch index, ...). Same inputs give the same stream on any
// platform; different tag paths give effectively independent streams.
inline std::uint64_t derive_stream(std::uint64_t master,
                                   std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t t : tags) h = splitmix64(h ^ (t + 0x9e3779b97f4a7c15ULL));
  return h;
}

// Deterministic random source. mt19937_64 is bit-exact by the standard; the
// normal/exponential transforms are written out here because the std
// distributions are implementation-defined and would break reproducibility
// guarantees across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // uniform in [0, 1), 53-bit resolution
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // uniform in (0, 1], safe as a log() argument
  double uniform_pos() {
    return (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;
  }

  // standard normal via Box-Muller; caches the second variate
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u = uniform_pos();
    const double v = uniform();
    const double r = std::sqrt(-2.0 * std::log(u));
    const double a = 6.283185307179586476925286766559 * v;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // unit-rate exponential
  double exponential() { return -std::log(uniform_pos()); }

  // fair coin in {-1, +1}
  double sign() { return (gen_() & 1u) ? 1.0 : -1.0; }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace mmdopt
