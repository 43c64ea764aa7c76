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

#include "cmdp/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cmdp/markov.hpp"
#include "cmdp/model_io.hpp"
#include "cmdp/oracle.hpp"

namespace cmdp {

const char* to_string(DatasetMode mode) {
  return mode == DatasetMode::Synchronous ? "sync" : "async";
}

DatasetMode dataset_mode_from_string(const std::string& name) {
  if (name == "sync" || name == "synchronous") return DatasetMode::Synchronous;
  if (name == "async" || name == "asynchronous") return DatasetMode::Asynchronous;
  throw std::invalid_argument("dataset: unknown mode '" + name + "' (expected sync or async)");
}

Emission Emission::of(const CmdpModel& model) {
  return Emission{model.num_states(), model.num_actions(), model.reward(), model.utilities()};
}

SampleTuple make_sample(const Emission& emission, const Transition& tr) {
  const int k = tr.s * emission.num_actions + tr.a;
  return SampleTuple{tr.s0, tr.s, tr.a, tr.s_next, emission.reward(k), emission.utilities.col(k)};
}

SampleTuple OfflineDataset::tuple(std::int64_t t) const {
  if (t < 0 || t >= size()) throw std::out_of_range("dataset: tuple index out of range");
  return make_sample(emission, tuples[static_cast<std::size_t>(t)]);
}

void TupleStream::require(std::int64_t count, const std::string& purpose) const {
  const auto left = remaining();
  if (left && *left < count) {
    throw DataExhausted("dataset: " + purpose + " needs " + std::to_string(count) +
                            " fresh tuples but only " + std::to_string(*left) + " remain",
                        count, *left);
  }
}

DatasetStream::DatasetStream(std::shared_ptr<const OfflineDataset> data, std::int64_t start)
    : data_(std::move(data)), start_(start), cursor_(start) {
  if (!data_) throw std::invalid_argument("dataset: null dataset");
  if (start < 0 || start > data_->size()) throw std::invalid_argument("dataset: start out of range");
}

Transition DatasetStream::next() {
  if (cursor_ >= data_->size())
    throw DataExhausted("dataset: exhausted after " + std::to_string(data_->size()) + " tuples",
                        cursor_ + 1, data_->size());
  return data_->tuples[static_cast<std::size_t>(cursor_++)];
}

namespace {

std::vector<AliasTable> kernel_tables(const CmdpModel& model) {
  std::vector<AliasTable> tables;
  tables.reserve(static_cast<std::size_t>(model.num_pairs()));
  for (int k = 0; k < model.num_pairs(); ++k)
    tables.emplace_back(model.transition().row(k).transpose());
  return tables;
}

}  // namespace

SyncSamplerStream::SyncSamplerStream(const CmdpModel& model, const Vector& mu, std::uint64_t seed)
    : emission_(Emission::of(model)),
      num_actions_(model.num_actions()),
      rng_(seed, Stream::Dataset) {
  check_pair_distribution(model, mu, "dataset");
  initial_ = AliasTable(model.initial_dist());
  pairs_ = AliasTable(mu);
  next_ = kernel_tables(model);
}

Transition SyncSamplerStream::next() {
  Transition tr;
  tr.s0 = initial_.sample(rng_);
  const int k = pairs_.sample(rng_);
  tr.s = k / num_actions_;
  tr.a = k % num_actions_;
  tr.s_next = next_[static_cast<std::size_t>(k)].sample(rng_);
  ++consumed_;
  return tr;
}

AsyncSamplerStream::AsyncSamplerStream(const CmdpModel& model, const Policy& pi_b,
                                       std::uint64_t seed, std::int64_t burn_in,
                                       std::optional<int> start_state)
    : emission_(Emission::of(model)),
      num_actions_(model.num_actions()),
      rng_(seed, Stream::Dataset) {
  if (pi_b.num_states() != model.num_states() || pi_b.num_actions() != model.num_actions())
    throw std::invalid_argument("dataset: behavior policy dimensions do not match the model");
  if (burn_in < 0) throw std::invalid_argument("dataset: burn_in must be >= 0");
  const Matrix chain = policy_transition(model, pi_b);
  if (!is_irreducible(chain))
    throw PreconditionError("dataset: state chain under the behavior policy is reducible");
  const int period = chain_period(chain);
  if (period != 1)
    throw PreconditionError("dataset: state chain under the behavior policy has period " +
                            std::to_string(period));
  for (int s = 0; s < model.num_states(); ++s) policy_.emplace_back(pi_b.probs().row(s).transpose());
  next_ = kernel_tables(model);
  if (start_state) {
    if (*start_state < 0 || *start_state >= model.num_states())
      throw std::invalid_argument("dataset: start state out of range");
    state_ = *start_state;
  } else {
    state_ = AliasTable(model.initial_dist()).sample(rng_);
  }
  for (std::int64_t t = 0; t < burn_in; ++t) step();
}

Transition AsyncSamplerStream::step() {
  Transition tr;
  tr.s0 = -1;
  tr.s = state_;
  tr.a = policy_[static_cast<std::size_t>(state_)].sample(rng_);
  tr.s_next = next_[static_cast<std::size_t>(tr.s * num_actions_ + tr.a)].sample(rng_);
  state_ = tr.s_next;
  return tr;
}

Transition AsyncSamplerStream::next() {
  ++consumed_;
  return step();
}

namespace {

void check_count(std::int64_t n) {
  if (n < 1) throw std::invalid_argument("dataset: number of tuples must be >= 1");
}

}  // namespace

OfflineDataset sample_sync(const CmdpModel& model, const Vector& mu, std::int64_t n,
                           std::uint64_t seed) {
  check_count(n);
  SyncSamplerStream stream(model, mu, seed);
  OfflineDataset data;
  data.mode = DatasetMode::Synchronous;
  data.seed = seed;
  data.discount = model.discount();
  data.emission = stream.emission();
  data.reference = mu;
  data.tuples.reserve(static_cast<std::size_t>(n));
  for (std::int64_t t = 0; t < n; ++t) data.tuples.push_back(stream.next());
  return data;
}

OfflineDataset sample_async(const CmdpModel& model, const Policy& pi_b, std::int64_t n,
                            std::uint64_t seed, std::int64_t burn_in,
                            std::optional<int> start_state) {
  check_count(n);
  AsyncSamplerStream stream(model, pi_b, seed, burn_in, start_state);
  OfflineDataset data;
  data.mode = DatasetMode::Asynchronous;
  data.seed = seed;
  data.discount = model.discount();
  data.emission = stream.emission();
  data.reference = pi_b.probs().transpose().reshaped();
  data.tuples.reserve(static_cast<std::size_t>(n));
  for (std::int64_t t = 0; t < n; ++t) data.tuples.push_back(stream.next());
  return data;
}

void save_dataset(const OfflineDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("dataset: cannot open '" + path + "' for writing");
  nlohmann::json header;
  header["mode"] = to_string(data.mode);
  header["seed"] = data.seed;
  header["n"] = data.size();
  header["num_states"] = data.emission.num_states;
  header["num_actions"] = data.emission.num_actions;
  header["num_constraints"] = data.emission.num_constraints();
  header["gamma"] = data.discount;
  header["reference"] = vector_to_json(data.reference);
  out << header.dump() << '\n';
  const int ni = data.emission.num_constraints();
  char buf[64];
  for (const Transition& tr : data.tuples) {
    const int k = tr.s * data.emission.num_actions + tr.a;
    out << tr.s0 << ',' << tr.s << ',' << tr.a << ',' << tr.s_next;
    std::snprintf(buf, sizeof buf, ",%.17g", data.emission.reward(k));
    out << buf;
    for (int i = 0; i < ni; ++i) {
      std::snprintf(buf, sizeof buf, ",%.17g", data.emission.utilities(i, k));
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("dataset: failed writing '" + path + "'");
}

OfflineDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("dataset: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("dataset: empty file '" + path + "'");
  const nlohmann::json header = nlohmann::json::parse(line);
  OfflineDataset data;
  data.mode = dataset_mode_from_string(header.at("mode").get<std::string>());
  data.seed = header.at("seed").get<std::uint64_t>();
  data.discount = header.at("gamma").get<double>();
  const int ns = header.at("num_states").get<int>();
  const int na = header.at("num_actions").get<int>();
  const int ni = header.at("num_constraints").get<int>();
  const auto n = header.at("n").get<std::int64_t>();
  if (ns < 1 || na < 1 || ni < 0 || n < 0) throw std::invalid_argument("dataset: bad header");
  if (header.contains("reference")) data.reference = vector_from_json(header.at("reference"));
  const int pairs = ns * na;
  data.emission = Emission{ns, na, Vector::Zero(pairs), Matrix::Zero(ni, pairs)};
  std::vector<bool> seen(static_cast<std::size_t>(pairs), false);
  data.tuples.reserve(static_cast<std::size_t>(n));

  std::int64_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    std::istringstream fields(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(fields, cell, ',')) cells.push_back(cell);
    if (static_cast<int>(cells.size()) != 5 + ni)
      throw std::invalid_argument("dataset: row " + std::to_string(row) + " has " +
                                  std::to_string(cells.size()) + " fields, expected " +
                                  std::to_string(5 + ni));
    Transition tr{std::stoi(cells[0]), std::stoi(cells[1]), std::stoi(cells[2]), std::stoi(cells[3])};
    const bool s0_ok = data.mode == DatasetMode::Asynchronous ? tr.s0 == -1 : (tr.s0 >= 0 && tr.s0 < ns);
    if (!s0_ok || tr.s < 0 || tr.s >= ns || tr.a < 0 || tr.a >= na || tr.s_next < 0 || tr.s_next >= ns)
      throw std::invalid_argument("dataset: row " + std::to_string(row) + " has an index out of range");
    const int k = tr.s * na + tr.a;
    const double r = std::stod(cells[4]);
    Vector u(ni);
    for (int i = 0; i < ni; ++i) u(i) = std::stod(cells[5 + static_cast<std::size_t>(i)]);
    if (!seen[static_cast<std::size_t>(k)]) {
      seen[static_cast<std::size_t>(k)] = true;
      data.emission.reward(k) = r;
      data.emission.utilities.col(k) = u;
    } else if (data.emission.reward(k) != r || data.emission.utilities.col(k) != u) {
      throw std::invalid_argument("dataset: row " + std::to_string(row) +
                                  " emits a different reward or utility for a pair seen before");
    }
    data.tuples.push_back(tr);
  }
  if (data.size() != n)
    throw std::invalid_argument("dataset: header declares " + std::to_string(n) + " rows, found " +
                                std::to_string(data.size()));
  if (data.mode == DatasetMode::Asynchronous) {
    for (std::int64_t t = 0; t + 1 < data.size(); ++t)
      if (data.tuples[static_cast<std::size_t>(t)].s_next != data.tuples[static_cast<std::size_t>(t + 1)].s)
        throw std::invalid_argument("dataset: asynchronous rows do not chain at row " + std::to_string(t + 2));
  }
  return data;
}

Vector empirical_pair_frequencies(const OfflineDataset& data) {
  Vector freq = Vector::Zero(data.emission.num_pairs());
  for (const Transition& tr : data.tuples) freq(tr.s * data.emission.num_actions + tr.a) += 1.0;
  if (!data.tuples.empty()) freq /= static_cast<double>(data.size());
  return freq;
}

}  // namespace cmdp
