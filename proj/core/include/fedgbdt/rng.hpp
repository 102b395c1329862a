#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <vector>

namespace fedgbdt {

// Deterministic random source. The mt19937_64 engine sequence is fully
// specified by the standard; the distribution transforms below are
// hand-rolled so that draws are identical across platforms and standard
// library implementations (std::*_distribution is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix(seed)) {}

  // Derives an independent labeled stream from a root seed, e.g.
  // Rng::substream(seed, {kStreamPartition, client, round}).
  static Rng substream(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = splitmix(root);
    for (std::uint64_t p : path) s = splitmix(s ^ splitmix(p + 0x9e3779b97f4a7c15ull));
    return Rng(s);
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, bound), bound > 0. Lemire's unbiased method.
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("Rng::below: bound must be positive");
    std::uint64_t x = next_u64();
    unsigned __int128 m = static_cast<unsigned __int128>(x) * bound;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < bound) {
      std::uint64_t t = (0 - bound) % bound;
      while (lo < t) {
        x = next_u64();
        m = static_cast<unsigned __int128>(x) * bound;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Standard normal via Box-Muller; consumes two uniforms per call.
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Gamma(alpha, 1) via Marsaglia-Tsang squeeze.
  double gamma(double alpha) {
    if (alpha <= 0.0) throw std::invalid_argument("Rng::gamma: alpha must be positive");
    if (alpha < 1.0) {
      double u = uniform();
      while (u <= 0.0) u = uniform();
      return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
    }
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  std::vector<double> dirichlet(double alpha, std::size_t k) {
    std::vector<double> out(k);
    for (;;) {
      double sum = 0.0;
      for (auto& x : out) {
        x = gamma(alpha);
        sum += x;
      }
      if (sum > 0.0 && std::isfinite(sum)) {
        for (auto& x : out) x /= sum;
        return out;
      }
    }
  }

  // Laplace(0, scale) by inverse CDF.
  double laplace(double scale) {
    double u = uniform() - 0.5;
    double s = (u < 0.0) ? -1.0 : 1.0;
    return -scale * s * std::log1p(-2.0 * std::fabs(u));
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::mt19937_64 engine_;
};

// Stream labels used to derive independent substreams from one root seed.
enum StreamLabel : std::uint64_t {
  kStreamPartition = 1,
  kStreamBaggingOrder = 2,
  kStreamDpNoise = 3,
  kStreamTestSplit = 4,
  kStreamFixture = 5,
};

}  // namespace fedgbdt
