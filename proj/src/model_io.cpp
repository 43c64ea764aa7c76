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

#include "cmdp/model_io.hpp"

#include <fstream>
#include <stdexcept>

namespace cmdp {

using nlohmann::json;

json model_to_json(const CmdpModel& model) {
  const int ns = model.num_states();
  const int na = model.num_actions();
  json doc;
  doc["gamma"] = model.discount();
  doc["rho0"] = vector_to_json(model.initial_dist());

  json reward = json::array();
  json transition = json::array();
  for (int s = 0; s < ns; ++s) {
    json r_row = json::array();
    json p_rows = json::array();
    for (int a = 0; a < na; ++a) {
      r_row.push_back(model.reward(s, a));
      json next = json::array();
      for (int s2 = 0; s2 < ns; ++s2) next.push_back(model.transition(s, a, s2));
      p_rows.push_back(std::move(next));
    }
    reward.push_back(std::move(r_row));
    transition.push_back(std::move(p_rows));
  }
  json utilities = json::array();
  for (int i = 0; i < model.num_constraints(); ++i) {
    json u_i = json::array();
    for (int s = 0; s < ns; ++s) {
      json row = json::array();
      for (int a = 0; a < na; ++a) row.push_back(model.utility(i, s, a));
      u_i.push_back(std::move(row));
    }
    utilities.push_back(std::move(u_i));
  }
  doc["reward"] = std::move(reward);
  doc["utilities"] = std::move(utilities);
  doc["transition"] = std::move(transition);
  return doc;
}

namespace {

void expect(bool condition, const std::string& what) {
  if (!condition) throw std::invalid_argument("cmdp-core: malformed model document: " + what);
}

}  // namespace

CmdpModel model_from_json(const json& doc) {
  expect(doc.is_object(), "expected an object");
  for (const char* key : {"gamma", "rho0", "reward", "utilities", "transition"})
    expect(doc.contains(key), std::string("missing key '") + key + "'");

  const json& reward = doc.at("reward");
  expect(reward.is_array() && !reward.empty() && reward[0].is_array() && !reward[0].empty(),
         "reward must be a nonempty [S][A] array");
  const int ns = static_cast<int>(reward.size());
  const int na = static_cast<int>(reward[0].size());
  const int n = ns * na;

  Vector r(n);
  Matrix p(n, ns);
  const json& transition = doc.at("transition");
  expect(transition.is_array() && static_cast<int>(transition.size()) == ns,
         "transition must be [S][A][S]");
  for (int s = 0; s < ns; ++s) {
    expect(static_cast<int>(reward[s].size()) == na, "ragged reward array");
    expect(static_cast<int>(transition[s].size()) == na, "ragged transition array");
    for (int a = 0; a < na; ++a) {
      r(s * na + a) = reward[s][a].get<double>();
      const json& next = transition[s][a];
      expect(static_cast<int>(next.size()) == ns, "transition row length must be |S|");
      for (int s2 = 0; s2 < ns; ++s2) p(s * na + a, s2) = next[s2].get<double>();
    }
  }

  const json& utilities = doc.at("utilities");
  expect(utilities.is_array(), "utilities must be an array");
  const int ni = static_cast<int>(utilities.size());
  Matrix u(ni, n);
  for (int i = 0; i < ni; ++i) {
    expect(static_cast<int>(utilities[i].size()) == ns, "utilities must be [I][S][A]");
    for (int s = 0; s < ns; ++s) {
      expect(static_cast<int>(utilities[i][s].size()) == na, "utilities must be [I][S][A]");
      for (int a = 0; a < na; ++a) u(i, s * na + a) = utilities[i][s][a].get<double>();
    }
  }

  const Vector rho0 = vector_from_json(doc.at("rho0"));
  return CmdpModel(ns, na, doc.at("gamma").get<double>(), std::move(p), std::move(r),
                   std::move(u), rho0);
}

void save_model(const CmdpModel& model, const std::string& path) {
  write_json_file(model_to_json(model), path);
}

CmdpModel load_model(const std::string& path) { return model_from_json(read_json_file(path)); }

json policy_to_json(const Policy& pi) {
  json rows = json::array();
  for (int s = 0; s < pi.num_states(); ++s) {
    json row = json::array();
    for (int a = 0; a < pi.num_actions(); ++a) row.push_back(pi(s, a));
    rows.push_back(std::move(row));
  }
  return rows;
}

Policy policy_from_json(const json& doc) {
  expect(doc.is_array() && !doc.empty(), "policy must be a nonempty [S][A] array");
  const auto ns = static_cast<Eigen::Index>(doc.size());
  const auto na = static_cast<Eigen::Index>(doc[0].size());
  Matrix probs(ns, na);
  for (Eigen::Index s = 0; s < ns; ++s) {
    expect(static_cast<Eigen::Index>(doc[s].size()) == na, "ragged policy array");
    for (Eigen::Index a = 0; a < na; ++a) probs(s, a) = doc[s][a].get<double>();
  }
  return Policy(std::move(probs));
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const json& doc) {
  expect(doc.is_array(), "expected a numeric array");
  Vector v(static_cast<Eigen::Index>(doc.size()));
  for (std::size_t i = 0; i < doc.size(); ++i) v(static_cast<Eigen::Index>(i)) = doc[i].get<double>();
  return v;
}

void write_json_file(const json& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return json::parse(in);
}

}  // namespace cmdp
