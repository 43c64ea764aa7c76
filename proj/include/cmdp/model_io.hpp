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

#include <string>

#include <json.hpp>

#include "cmdp/model.hpp"

namespace cmdp {

// Model document: {gamma, rho0: [S], reward: [S][A], utilities: [I][S][A],
// transition: [S][A][S]}. Loading runs the full CmdpModel validation.
nlohmann::json model_to_json(const CmdpModel& model);
CmdpModel model_from_json(const nlohmann::json& doc);

void save_model(const CmdpModel& model, const std::string& path);
CmdpModel load_model(const std::string& path);

nlohmann::json policy_to_json(const Policy& pi);
Policy policy_from_json(const nlohmann::json& doc);

nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& doc);

/// Writes a JSON document with a trailing newline; throws on I/O failure.
void write_json_file(const nlohmann::json& doc, const std::string& path);
nlohmann::json read_json_file(const std::string& path);

}  // namespace cmdp
