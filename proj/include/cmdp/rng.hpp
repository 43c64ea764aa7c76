/*
 * Copyright 2026 The cmdp-lab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "cmdp/model.hpp"

namespace cmdp {

/// Independent purposes get independent streams derived from one user seed.
enum class Stream : std::uint64_t {
  Dataset = 1,
  Solver = 2,
  Verify = 3,
  Instance = 4,
};

/// splitmix64 finalizer; used to derive per-stream seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// mt19937_64 with portable draws (the standard distributions are
/// implementation-defined, so uniforms are built from raw 53-bit words).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, Stream stream)
      : engine_(mix_seed(seed, static_cast<std::uint64_t>(stream))) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1].
  double uniform_open() { return 1.0 - uniform(); }

  /// Uniform integer in [0, n).
  int index(int n) { return static_cast<int>(uniform() * n) % n; }

  double exponential() { return -std::log(uniform_open()); }

 private:
  std::mt19937_64 engine_;
};

/// Walker alias table: O(1) draws from a fixed discrete distribution.
class AliasTable {
 public:
  AliasTable() = default;
  explicit AliasTable(const Vector& probs) {
    const auto n = static_cast<int>(probs.size());
    if (n == 0) throw std::invalid_argument("alias table needs a nonempty distribution");
    const double total = probs.sum();
    if (!(total > 0.0) || probs.minCoeff() < 0.0)
      throw std::invalid_argument("alias table needs nonnegative weights with positive mass");
    prob_.assign(n, 0.0);
    alias_.assign(n, 0);
    std::vector<double> scaled(n);
    std::vector<int> small;
    std::vector<int> large;
    for (int i = 0; i < n; ++i) {
      scaled[i] = probs(i) * n / total;
      (scaled[i] < 1.0 ? small : large).push_back(i);
    }
    while (!small.empty() && !large.empty()) {
      const int s = small.back();
      small.pop_back();
      const int l = large.back();
      prob_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] -= 1.0 - scaled[s];
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    for (int i : large) prob_[i] = 1.0;
    // Leftovers from rounding; a zero-weight entry must never be emitted.
    for (int i : small) prob_[i] = probs(i) > 0.0 ? 1.0 : 0.0;
    for (int i = 0; i < n; ++i)
      if (probs(i) == 0.0 && prob_[i] == 1.0) prob_[i] = 0.0;
    for (int i = 0; i < n; ++i)
      if (probs(alias_[i]) == 0.0) alias_[i] = first_positive(probs);
  }

  int sample(Rng& rng) const {
    const int n = static_cast<int>(prob_.size());
    const double u = rng.uniform() * n;
    const int i = std::min(static_cast<int>(u), n - 1);
    return (u - i) < prob_[i] ? i : alias_[i];
  }

  int size() const { return static_cast<int>(prob_.size()); }

 private:
  static int first_positive(const Vector& probs) {
    for (Eigen::Index i = 0; i < probs.size(); ++i)
      if (probs(i) > 0.0) return static_cast<int>(i);
    return 0;
  }

  std::vector<double> prob_;
  std::vector<int> alias_;
};

/// Uniform draw from the probability simplex (Dirichlet with unit concentration).
inline Vector dirichlet_uniform(Rng& rng, int n) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.exponential();
  return v / v.sum();
}

}  // namespace cmdp
