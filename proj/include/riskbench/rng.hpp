#pragma once

// Counter-based random generation. Every draw is a pure function of
// (key, counter), so streams can be split by name without coupling and
// identical seeds reproduce identical sequences on any platform with
// IEEE-754 doubles. The integer core is splitmix64; normals come from a
// fixed inverse-CDF rational approximation rather than Box-Muller so the
// output stream does not depend on libm's sin/cos.

#include <cstdint>
#include <string_view>
#include <vector>

namespace riskbench {

uint64_t splitmix64(uint64_t z);
uint64_t fnv1a64(std::string_view s);

class Rng {
 public:
  explicit Rng(uint64_t seed, std::string_view stream = "");

  // Independent child stream; counter starts at zero.
  Rng derive(std::string_view child) const;
  Rng derive(uint64_t index) const;

  uint64_t next_u64();
  double next_double();            // uniform on (0,1)
  double next_normal();            // standard normal
  double next_normal(double mean, double sd) { return mean + sd * next_normal(); }
  bool next_bernoulli(double p) { return next_double() < p; }
  uint64_t next_below(uint64_t n); // uniform on [0,n), rejection sampled

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct indices from [0,n), in draw order.
  std::vector<size_t> sample_without_replacement(size_t n, size_t k);

  uint64_t key() const { return key_; }

 private:
  Rng(uint64_t key, uint64_t counter) : key_(key), counter_(counter) {}
  uint64_t key_;
  uint64_t counter_;
};

// Inverse standard normal CDF (Acklam's rational approximation,
// |relative error| < 1.2e-9). Exposed for tests.
double inverse_normal_cdf(double p);

}  // namespace riskbench
