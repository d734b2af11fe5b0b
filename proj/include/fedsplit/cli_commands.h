/*
 * Copyright 2026 The Fedsplit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FEDSPLIT_CLI_COMMANDS_H_
#define FEDSPLIT_CLI_COMMANDS_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "fedsplit/orchestrator.h"
#include "fedsplit/problem.h"
#include "json.hpp"

namespace fedsplit {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitInvariant = 3;

// Validation failures map to 2, everything else that is not OK to 3.
int ExitCodeFor(const absl::Status& status);

struct ProblemSpec {
  int clients = 0;
  int dim = 0;
  // Exactly one of spread and gamma_het is set, unless file is given.
  std::optional<double> spread;
  std::optional<double> gamma_het;
  uint64_t seed = 0;
  ProblemOptions options;
  // Path to a problem document; resolved against the config directory.
  std::string file;
};

struct ExperimentConfig {
  ProblemSpec problem;
  FLConfig fl;
  nlohmann::json source;
};

absl::StatusOr<ExperimentConfig> ParseExperimentConfig(
    const nlohmann::json& doc, const std::string& base_dir = ".");
absl::StatusOr<nlohmann::json> ReadJsonFile(const std::string& path);
absl::StatusOr<ExperimentConfig> LoadExperimentConfig(const std::string& path);

absl::StatusOr<std::vector<QuadraticClientLoss>> BuildProblem(
    const ProblemSpec& spec);

nlohmann::json FLConfigToJson(const FLConfig& config);

// "a..b" (inclusive) or "a,b,c".
absl::StatusOr<std::vector<uint64_t>> ParseSeeds(const std::string& text);

struct SweepAxis {
  std::string key;
  std::vector<double> values;
};

// "key=v1,v2". Keys: bits, eps_split, gamma, M, spread, gamma_het, epsilon,
// m, ldp_scale.
absl::StatusOr<SweepAxis> ParseSweep(const std::string& text);
absl::Status ApplySweepValue(nlohmann::json& doc, const std::string& key,
                             double value);

struct RunSpec {
  std::string config_path;
  // Comma-separated modes; empty uses the config's mode.
  std::string modes;
  std::vector<uint64_t> seeds = {0};
  std::string out = "out";
  std::optional<SweepAxis> sweep;
};

int CmdRun(const RunSpec& spec);
int CmdValidate(const std::string& config_path);

struct AuditSpec {
  std::string config_path;
  std::string out = "audit.json";
  std::vector<double> magnitudes = {1e-3, 1.0, 1e3, 1e6};
  int tuples = 50;
  int learning_rounds = 3;
  uint64_t seed = 0;
  bool mutate = false;
};

int CmdAudit(const AuditSpec& spec);

struct ReportSpec {
  std::string run_dir;
  // Defaults to <run_dir>/report.
  std::string out;
};

int CmdReport(const ReportSpec& spec);

// Writes via a temporary file and rename.
absl::Status WriteFileAtomic(const std::string& path,
                             const std::string& content);

std::string MetricsCsv(const RunResult& result);

}  // namespace fedsplit

#endif  // FEDSPLIT_CLI_COMMANDS_H_
