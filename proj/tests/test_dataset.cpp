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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include <json.hpp>

#include "cmdp/dataset.hpp"
#include "cmdp/markov.hpp"
#include "test_models.hpp"

using namespace cmdp;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("cmdp_lab_" + name)).string();
}

CmdpModel two_state_chain(double p01, double p10) {
  Matrix p(2, 2);
  p << 1.0 - p01, p01,
       p10, 1.0 - p10;
  Vector rho(2);
  rho << 0.5, 0.5;
  return CmdpModel(2, 1, 0.9, p, Vector::Zero(2), Matrix::Zero(1, 2), rho);
}

}  // namespace

TEST_CASE("synchronous sampling from a point mass") {
  std::mt19937_64 gen(1);
  const CmdpModel model = testing::random_model(gen, 3, 2, 1, 0.9);
  Vector mu = Vector::Zero(6);
  mu(3) = 1.0;
  const OfflineDataset data = sample_sync(model, mu, 500, 9);
  for (const Transition& tr : data.tuples) {
    CHECK(tr.s == 1);
    CHECK(tr.a == 1);
    CHECK(tr.s0 >= 0);
  }
}

TEST_CASE("synchronous pair frequencies concentrate around mu") {
  std::mt19937_64 gen(2);
  const CmdpModel model = testing::random_model(gen, 4, 3, 0, 0.9);
  const Vector mu = Vector::Constant(12, 1.0 / 12.0);
  const int n = 100000;
  const Vector freq = empirical_pair_frequencies(sample_sync(model, mu, n, 17));
  for (int k = 0; k < 12; ++k) CHECK(std::abs(freq(k) - mu(k)) <= 4.0 * std::sqrt(mu(k) * (1.0 - mu(k)) / n));
}

TEST_CASE("synchronous next states follow the kernel") {
  std::mt19937_64 gen(3);
  const CmdpModel model = testing::random_model(gen, 3, 2, 0, 0.9);
  Vector mu = Vector::Zero(6);
  mu(4) = 1.0;
  const int n = 100000;
  const OfflineDataset data = sample_sync(model, mu, n, 5);
  Vector counts = Vector::Zero(3);
  Vector initial = Vector::Zero(3);
  for (const Transition& tr : data.tuples) {
    counts(tr.s_next) += 1.0;
    initial(tr.s0) += 1.0;
  }
  for (int s = 0; s < 3; ++s) {
    const double p = model.transition(2, 0, s);
    CHECK(std::abs(counts(s) / n - p) <= 4.0 * std::sqrt(p * (1.0 - p) / n) + 1e-12);
    const double q = model.initial_dist()(s);
    CHECK(std::abs(initial(s) / n - q) <= 4.0 * std::sqrt(q * (1.0 - q) / n) + 1e-12);
  }
}

TEST_CASE("fixed seeds give byte-identical dataset files") {
  std::mt19937_64 gen(4);
  const CmdpModel model = testing::random_model(gen, 3, 2, 2, 0.9);
  const Vector mu = testing::random_simplex(gen, 6);
  const std::string a = temp_path("sync_a.csv");
  const std::string b = temp_path("sync_b.csv");
  save_dataset(sample_sync(model, mu, 1000, 42), a);
  save_dataset(sample_sync(model, mu, 1000, 42), b);
  CHECK(slurp(a) == slurp(b));
  const OfflineDataset back = load_dataset(a);
  const OfflineDataset orig = sample_sync(model, mu, 1000, 42);
  CHECK(back.tuples == orig.tuples);
  CHECK(back.tuple(7).r == orig.tuple(7).r);
  CHECK(back.tuple(7).u == orig.tuple(7).u);
  CHECK(sample_sync(model, mu, 1000, 43).tuples != orig.tuples);

  // An edited row that changes an emitted reward is rejected.
  std::ifstream in(a);
  std::string header;
  std::getline(in, header);
  std::string first;
  std::getline(in, first);
  // Same pair as the first row but a different reward.
  std::string changed = first;
  const auto fifth = [&] {
    std::size_t pos = 0;
    for (int c = 0; c < 4; ++c) pos = changed.find(',', pos) + 1;
    return pos;
  }();
  const auto sixth = changed.find(',', fifth);
  changed = changed.substr(0, fifth) + "0.123456" + changed.substr(sixth);
  const std::string c = temp_path("sync_c.csv");
  {
    std::ofstream out(c);
    nlohmann::json h = nlohmann::json::parse(header);
    h["n"] = 2;
    out << h.dump() << "\n" << first << "\n" << changed << "\n";
  }
  CHECK_THROWS_AS(load_dataset(c), std::invalid_argument);
  std::remove(a.c_str());
  std::remove(b.c_str());
  std::remove(c.c_str());
}

TEST_CASE("sampler streams replay the stored datasets") {
  std::mt19937_64 gen(6);
  const CmdpModel model = testing::random_model(gen, 4, 2, 1, 0.9);
  const Vector mu = testing::random_simplex(gen, 8);
  const OfflineDataset data = sample_sync(model, mu, 200, 11);
  SyncSamplerStream stream(model, mu, 11);
  for (const Transition& tr : data.tuples) CHECK(stream.next() == tr);

  const Policy pi = testing::random_policy(gen, 4, 2);
  const OfflineDataset traj = sample_async(model, pi, 200, 12, 10);
  AsyncSamplerStream astream(model, pi, 12, 10);
  for (const Transition& tr : traj.tuples) CHECK(astream.next() == tr);

  auto shared = std::make_shared<const OfflineDataset>(data);
  DatasetStream cursor(shared, 190);
  CHECK(cursor.remaining().value() == 10);
  CHECK_THROWS_AS(cursor.require(11, "verification"), DataExhausted);
  for (int i = 0; i < 10; ++i) cursor.next();
  CHECK_THROWS_AS(cursor.next(), DataExhausted);
}

TEST_CASE("asynchronous trajectories chain and reach stationarity") {
  const CmdpModel model = two_state_chain(0.3, 0.3);
  const Policy pi = Policy::uniform(2, 1);
  const int n = 100000;
  const OfflineDataset data = sample_async(model, pi, n, 21, 0, 1);
  CHECK(data.tuples.front().s == 1);
  double zeros = 0.0;
  for (std::int64_t t = 0; t < data.size(); ++t) {
    const Transition& tr = data.tuples[static_cast<std::size_t>(t)];
    CHECK(tr.s0 == -1);
    if (t + 1 < data.size()) CHECK(tr.s_next == data.tuples[static_cast<std::size_t>(t + 1)].s);
    zeros += tr.s == 0;
  }
  CHECK(std::abs(zeros / n - 0.5) <= 4.0 / std::sqrt(static_cast<double>(n)));

  const std::string path = temp_path("async.csv");
  save_dataset(data, path);
  const OfflineDataset back = load_dataset(path);
  CHECK(back.mode == DatasetMode::Asynchronous);
  CHECK(back.tuples == data.tuples);
  std::remove(path.c_str());
}

TEST_CASE("asynchronous sampler rejects reducible and periodic chains") {
  const CmdpModel periodic = two_state_chain(1.0, 1.0);
  CHECK_THROWS_AS(sample_async(periodic, Policy::uniform(2, 1), 10, 1), PreconditionError);
  const CmdpModel reducible = two_state_chain(0.5, 0.0);
  CHECK_THROWS_AS(sample_async(reducible, Policy::uniform(2, 1), 10, 1), PreconditionError);
  CHECK_THROWS_AS(stationary_state_distribution(reducible.transition()), PreconditionError);
}

TEST_CASE("stationary distributions") {
  Matrix ds(3, 3);
  ds << 0.2, 0.5, 0.3,
        0.5, 0.1, 0.4,
        0.3, 0.4, 0.3;
  const Vector uniform = stationary_state_distribution(ds);
  for (int s = 0; s < 3; ++s) CHECK(uniform(s) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  const CmdpModel chain = two_state_chain(0.2, 0.4);
  const Vector mu = stationary_distribution(chain, Policy::uniform(2, 1));
  CHECK(mu(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(mu(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 20; ++trial) {
    const CmdpModel model = testing::random_model(gen, 6, 3, 0, 0.9);
    const Policy pi = testing::random_policy(gen, 6, 3);
    const Vector pairs = stationary_distribution(model, pi);
    CHECK(std::abs(pairs.sum() - 1.0) <= 1e-12);
    const Matrix p = policy_transition(model, pi);
    CHECK(stationary_residual(p, stationary_state_distribution(p)) <= kTolerances.stationary);
  }
}

TEST_CASE("mixing time curves") {
  Matrix rank_one(3, 3);
  rank_one.rowwise() = Eigen::RowVector3d(0.2, 0.3, 0.5);
  CHECK(mixing_time(rank_one).t_mix == 1);

  Matrix lazy(2, 2);
  lazy << 0.99, 0.01,
          0.01, 0.99;
  const MixingProfile slow = mixing_time(lazy);
  // E(t) = 0.98^t / 2 first drops to 1/4 at t = 35.
  CHECK(slow.t_mix == 35);
  CHECK(slow.t_mix >= 30);
  CHECK(static_cast<int>(slow.curve.size()) == 4 * slow.t_mix);

  std::mt19937_64 gen(10);
  for (int trial = 0; trial < 20; ++trial) {
    const CmdpModel model = testing::random_model(gen, 5, 2, 0, 0.9);
    const MixingProfile prof = mixing_time(model, testing::random_policy(gen, 5, 2));
    for (std::size_t t = 1; t <= prof.curve.size(); ++t) {
      CHECK(prof.curve[t - 1] <= std::pow(2.0, -std::floor(static_cast<double>(t) / prof.t_mix)) + 1e-12);
      if (t > 1) CHECK(prof.curve[t - 1] <= prof.curve[t - 2] + 1e-12);
    }
  }

  Matrix flip(2, 2);
  flip << 0.0, 1.0,
          1.0, 0.0;
  CHECK_THROWS_AS(mixing_time(flip), PreconditionError);
}
