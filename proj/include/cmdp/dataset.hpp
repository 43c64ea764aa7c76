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

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cmdp/errors.hpp"
#include "cmdp/model.hpp"
#include "cmdp/rng.hpp"

namespace cmdp {

enum class DatasetMode { Synchronous, Asynchronous };

const char* to_string(DatasetMode mode);
DatasetMode dataset_mode_from_string(const std::string& name);

/// Indices of one observed transition. s0 is -1 when the initial state is
/// drawn by the consumer (asynchronous data).
struct Transition {
  int s0 = -1;
  int s = 0;
  int a = 0;
  int s_next = 0;

  bool operator==(const Transition&) const = default;
};

/// Deterministic reward and utility emission: r(s,a) and u_i(s,a) as
/// observed in the data, over flattened pairs.
struct Emission {
  int num_states = 0;
  int num_actions = 0;
  Vector reward;
  /// I x (|S||A|).
  Matrix utilities;

  int num_constraints() const { return static_cast<int>(utilities.rows()); }
  int num_pairs() const { return num_states * num_actions; }
  static Emission of(const CmdpModel& model);
};

/// Full tuple (s0, s, a, s', r, u).
struct SampleTuple {
  int s0 = -1;
  int s = 0;
  int a = 0;
  int s_next = 0;
  double r = 0.0;
  Vector u;
};

/// Attaches the emitted reward and utilities to a transition.
SampleTuple make_sample(const Emission& emission, const Transition& tr);

/**
 * Immutable offline dataset.
 *
 * `reference` is the true pair distribution mu for synchronous data and the
 * behavior policy pi_b (flattened row-major over pairs) for asynchronous data.
 */
struct OfflineDataset {
  DatasetMode mode = DatasetMode::Synchronous;
  std::uint64_t seed = 0;
  double discount = 0.0;
  Emission emission;
  Vector reference;
  std::vector<Transition> tuples;

  std::int64_t size() const { return static_cast<std::int64_t>(tuples.size()); }
  SampleTuple tuple(std::int64_t t) const;
};

/// Sequential source of tuples. Every consumer (reference estimation, the
/// main loop, verification, later rounds) draws fresh tuples via next().
class TupleStream {
 public:
  virtual ~TupleStream() = default;
  virtual DatasetMode mode() const = 0;
  virtual const Emission& emission() const = 0;
  /// Throws DataExhausted when no tuple is left.
  virtual Transition next() = 0;
  virtual std::int64_t consumed() const = 0;
  /// Tuples left, or nullopt for an unbounded simulator stream.
  virtual std::optional<std::int64_t> remaining() const = 0;

  /// Throws DataExhausted naming `purpose` if fewer than `count` are left.
  void require(std::int64_t count, const std::string& purpose) const;
};

/// Cursor over a stored dataset.
class DatasetStream : public TupleStream {
 public:
  explicit DatasetStream(std::shared_ptr<const OfflineDataset> data, std::int64_t start = 0);

  DatasetMode mode() const override { return data_->mode; }
  const Emission& emission() const override { return data_->emission; }
  Transition next() override;
  std::int64_t consumed() const override { return cursor_ - start_; }
  std::optional<std::int64_t> remaining() const override { return data_->size() - cursor_; }

 private:
  std::shared_ptr<const OfflineDataset> data_;
  std::int64_t start_;
  std::int64_t cursor_;
};

/// Unbounded i.i.d. simulator: s0 ~ rho0, (s,a) ~ mu, s' ~ P(.|s,a).
class SyncSamplerStream : public TupleStream {
 public:
  SyncSamplerStream(const CmdpModel& model, const Vector& mu, std::uint64_t seed);

  DatasetMode mode() const override { return DatasetMode::Synchronous; }
  const Emission& emission() const override { return emission_; }
  Transition next() override;
  std::int64_t consumed() const override { return consumed_; }
  std::optional<std::int64_t> remaining() const override { return std::nullopt; }

 private:
  Emission emission_;
  int num_actions_;
  Rng rng_;
  AliasTable initial_;
  AliasTable pairs_;
  std::vector<AliasTable> next_;
  std::int64_t consumed_ = 0;
};

/// Unbounded single trajectory under a behavior policy.
class AsyncSamplerStream : public TupleStream {
 public:
  /// Checks that the state chain under pi_b is irreducible and aperiodic
  /// (PreconditionError otherwise), then discards `burn_in` steps. Without
  /// a start state the first state is drawn from rho0.
  AsyncSamplerStream(const CmdpModel& model, const Policy& pi_b, std::uint64_t seed,
                     std::int64_t burn_in = 0, std::optional<int> start_state = std::nullopt);

  DatasetMode mode() const override { return DatasetMode::Asynchronous; }
  const Emission& emission() const override { return emission_; }
  Transition next() override;
  std::int64_t consumed() const override { return consumed_; }
  std::optional<std::int64_t> remaining() const override { return std::nullopt; }

 private:
  Transition step();

  Emission emission_;
  int num_actions_;
  Rng rng_;
  std::vector<AliasTable> policy_;
  std::vector<AliasTable> next_;
  int state_ = 0;
  std::int64_t consumed_ = 0;
};

OfflineDataset sample_sync(const CmdpModel& model, const Vector& mu, std::int64_t n,
                           std::uint64_t seed);

OfflineDataset sample_async(const CmdpModel& model, const Policy& pi_b, std::int64_t n,
                            std::uint64_t seed, std::int64_t burn_in = 0,
                            std::optional<int> start_state = std::nullopt);

/// Header JSON line {mode, seed, n, num_states, num_actions, num_constraints,
/// gamma, reference}, then rows s0,s,a,s_next,r,u_1..u_I.
void save_dataset(const OfflineDataset& data, const std::string& path);
OfflineDataset load_dataset(const std::string& path);

/// Empirical pair frequencies of the whole dataset.
Vector empirical_pair_frequencies(const OfflineDataset& data);

}  // namespace cmdp
