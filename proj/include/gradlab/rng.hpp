// Copyright 2026 The GradLab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GRADLAB_RNG_HPP_
#define GRADLAB_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string_view>

namespace gradlab {

// Deterministic splittable random stream (splitmix64 core).
//
// Streams form a labeled tree: derive() produces an independent child stream
// from the parent's immutable key, so every consumer (dataset generation,
// trial t, attack round i, defense noise, ...) can be handed its own stream
// before any parallel fan-out. Draw order inside one stream is sequential;
// across streams nothing is shared, which keeps results independent of
// worker count and call interleaving.
//
// All distributions are implemented here (not via <random>) so that a given
// (seed, call sequence) yields identical output on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : Rng(Mix(seed ^ kGamma), FromKeyTag{}) {}

  // Child stream identified by a string label. Does not consume state.
  Rng Derive(std::string_view label) const {
    return Rng(Mix(key_ ^ Fnv1a(label)), FromKeyTag{});
  }

  // Child stream identified by an index (e.g. per-trial streams).
  Rng Derive(std::uint64_t index) const {
    return Rng(Mix(key_ ^ ((index + 1) * kGamma)), FromKeyTag{});
  }

  std::uint64_t NextU64() {
    state_ += kGamma;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double Uniform() { return static_cast<double>(NextU64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Standard normal via Box-Muller; the paired draw is cached.
  double Normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = Uniform();
    while (u1 <= 0.0) u1 = Uniform();
    const double u2 = Uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double two_pi_u2 = 2.0 * kPi * u2;
    cached_ = r * std::sin(two_pi_u2);
    has_cached_ = true;
    return r * std::cos(two_pi_u2);
  }

  double Normal(double mean, double stddev) { return mean + stddev * Normal(); }

  // Uniform integer in [0, n).
  int UniformInt(int n) {
    if (n <= 0) throw std::invalid_argument("UniformInt: n must be positive");
    const int v = static_cast<int>(Uniform() * static_cast<double>(n));
    return v >= n ? n - 1 : v;
  }

  // Index distributed according to `probs` (assumed to sum to ~1).
  int Categorical(std::span<const double> probs) {
    if (probs.empty()) throw std::invalid_argument("Categorical: empty distribution");
    const double u = Uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }

  std::uint64_t key() const { return key_; }

 private:
  struct FromKeyTag {};
  Rng(std::uint64_t key, FromKeyTag) : key_(key), state_(key) {}

  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  static constexpr double kPi = 3.14159265358979323846;

  static std::uint64_t Mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t Fnv1a(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001B3ULL;
    }
    return h;
  }

  std::uint64_t key_;
  std::uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace gradlab

#endif  // GRADLAB_RNG_HPP_
