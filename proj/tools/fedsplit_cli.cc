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

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedsplit/cli_commands.h"

int main(int argc, char** argv) {
  using namespace fedsplit;
  CLI::App app{"Federated learning with model splitting and quantization"};
  app.require_subcommand(1);

  RunSpec run;
  std::string seeds = "0";
  std::string sweep;
  auto* run_cmd = app.add_subcommand("run", "Train and write metrics");
  run_cmd->add_option("--config", run.config_path, "Config JSON")->required();
  run_cmd->add_option("--mode", run.modes,
                      "fedavg, ldp, msp or mspdq; comma-separated");
  run_cmd->add_option("--seeds", seeds, "a..b or a,b,c");
  run_cmd->add_option("--out", run.out, "Output directory");
  run_cmd->add_option("--sweep", sweep, "key=v1,v2");

  std::string validate_path;
  auto* validate_cmd = app.add_subcommand("validate", "Check a config");
  validate_cmd->add_option("--config", validate_path, "Config JSON")
      ->required();

  AuditSpec audit;
  auto* audit_cmd =
      app.add_subcommand("audit", "Replay privacy witnesses on fresh traces");
  audit_cmd->add_option("--config", audit.config_path, "Config JSON")
      ->required();
  audit_cmd->add_option("--out", audit.out, "Audit JSON path");
  audit_cmd->add_option("--magnitudes", audit.magnitudes,
                        "Perturbation norms");
  audit_cmd->add_option("--tuples", audit.tuples, "Witness tuples");
  audit_cmd->add_option("--rounds", audit.learning_rounds,
                        "Learning rounds to trace");
  audit_cmd->add_option("--seed", audit.seed, "Root seed");
  audit_cmd->add_flag("--mutate", audit.mutate,
                      "Replay corrupted witnesses (negative control)");

  ReportSpec report;
  auto* report_cmd = app.add_subcommand("report", "Emit plot-data CSVs");
  report_cmd->add_option("--run-dir", report.run_dir, "Output of run")
      ->required();
  report_cmd->add_option("--out", report.out, "Report directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  if (*run_cmd) {
    auto s = ParseSeeds(seeds);
    if (!s.ok()) {
      std::cerr << "error: " << s.status().message() << "\n";
      return kExitValidation;
    }
    run.seeds = *s;
    if (!sweep.empty()) {
      auto axis = ParseSweep(sweep);
      if (!axis.ok()) {
        std::cerr << "error: " << axis.status().message() << "\n";
        return kExitValidation;
      }
      run.sweep = *axis;
    }
    return CmdRun(run);
  }
  if (*validate_cmd) return CmdValidate(validate_path);
  if (*audit_cmd) return CmdAudit(audit);
  return CmdReport(report);
}
