// Copyright 2026 The UCH Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "uch/commands.hpp"
#include "uch/error.hpp"

namespace uch::cli {

/// Entry point of the `uch` executable. Returns the process exit code:
/// 0 ok, 1 usage, 2 data, 3 numerical.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Unified cross-modal hashing: train, evaluate, encode, sweep"};
  app.require_subcommand(1);

  std::string train_config;
  auto* train_cmd = app.add_subcommand("train", "train a model from a config file");
  train_cmd->add_option("--config", train_config, "run config")->required();

  std::string model_path, manifest_path, tasks = "i2t,t2i", report_path, ap_path;
  std::string database = "train-codes";
  std::optional<Index> r_cutoff;
  auto* eval_cmd = app.add_subcommand("eval", "score a model on its query split");
  eval_cmd->add_option("--model", model_path, "model file")->required();
  eval_cmd->add_option("--manifest", manifest_path, "dataset manifest")->required();
  eval_cmd->add_option("--tasks", tasks, "comma list of i2t, t2i");
  eval_cmd->add_option("--r-cutoff", r_cutoff, "ranks scored per query (default: all)");
  eval_cmd->add_option("--database", database, "train-codes or encoded");
  eval_cmd->add_option("--output", report_path, "report CSV (default: stdout)");
  eval_cmd->add_option("--ap-output", ap_path, "per-query AP CSV");

  std::string enc_model, enc_input, enc_output;
  int enc_modality = 1;
  bool enc_centered = false;
  auto* enc_cmd = app.add_subcommand("encode", "hash a feature CSV into a code file");
  enc_cmd->add_option("--model", enc_model, "model file")->required();
  enc_cmd->add_option("--input", enc_input, "feature CSV")->required();
  enc_cmd->add_option("--modality", enc_modality, "modality id (1-based)")->required();
  enc_cmd->add_option("--output", enc_output, "code file")->required();
  enc_cmd->add_flag("--centered", enc_centered, "input is already mean-centered");

  std::string sweep_config;
  std::optional<unsigned> workers;
  auto* sweep_cmd = app.add_subcommand("sweep", "train and score a hyperparameter grid");
  sweep_cmd->add_option("--config", sweep_config, "run config")->required();
  sweep_cmd->add_option("--workers", workers, "concurrent grid points");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train_cmd->parsed()) {
      const auto result = cmd_train(std::filesystem::path(train_config));
      out << result.run_dir.string() << '\n';
    } else if (eval_cmd->parsed()) {
      const auto reports = cmd_eval(model_path, manifest_path, parse_tasks(tasks), r_cutoff,
                                    parse_database_mode(database));
      const std::string csv = report_csv(reports);
      if (report_path.empty())
        out << csv;
      else
        detail::write_atomically(report_path, csv);
      if (!ap_path.empty()) {
        std::ostringstream os;
        write_ap_csv(reports, os);
        detail::write_atomically(ap_path, os.str());
      }
    } else if (enc_cmd->parsed()) {
      const auto codes = cmd_encode(enc_model, enc_input, enc_modality, enc_output, enc_centered);
      log_info("encode: " + std::to_string(codes.rows()) + " codes of " +
               std::to_string(codes.bits()) + " bits");
    } else if (sweep_cmd->parsed()) {
      const auto outcome = cmd_sweep(std::filesystem::path(sweep_config), workers);
      out << "trained " << outcome.trained << ", skipped " << outcome.skipped << '\n';
    }
  } catch (const std::exception& e) {
    err << "uch: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kExitOk;
}

}  // namespace uch::cli
