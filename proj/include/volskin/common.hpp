#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace volskin {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Library/CLI version string, set at configure time from git.
const char* revision();

// Worker count: RECON_THREADS when set (clamped to >= 1), else all hardware
// threads. apply_thread_env() pushes it into the OpenMP runtime.
int thread_count();
void apply_thread_env();

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DegeneratePoseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when a loss component stops being finite or the divergence guard
// trips; carries the offending component name for diagnostics.
struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& component_name, const std::string& what)
      : std::runtime_error(what), component(component_name) {}
  std::string component;
};

// Deterministic RNG. Raw mt19937_64 output is portable; the float/normal
// derivations are hand-rolled so streams do not depend on the standard
// library's distribution implementations.
class RngState {
 public:
  explicit RngState(uint64_t seed) : gen_(seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Box-Muller; one draw per call, two uniforms consumed.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
  double normal(double mu, double sigma) { return mu + sigma * normal(); }
  int uniform_int(int n) {  // [0, n)
    return static_cast<int>(gen_() % static_cast<uint64_t>(n));
  }
  uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t fnv1a(const std::string& s, uint64_t h = 1469598103934665603ull) {
  return fnv1a(s.data(), s.size(), h);
}

std::string hex64(uint64_t v);

}  // namespace volskin
