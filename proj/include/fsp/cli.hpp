#pragma once

#include <string>

#include "fsp/training.hpp"

namespace fsp {

// Settings shared by the train-like commands: model + training sections from
// a JSON config file, plus the paths given on the command line. The config
// file holds exactly the sections "encoder", "train" and "flags"; every key
// is optional but unknown keys are an error.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  bool deterministic = true;  // accepted and echoed; all code paths are
                              // single-threaded and seeded regardless
};

RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::string& path);

// Effective config with defaults resolved, as written next to artifacts.
std::string run_config_to_json(const RunConfig& rc);

// Entry point behind the `fsp` binary: generate | train | parse | evaluate |
// benchmark. Returns the process exit code; failures print one diagnostic
// line to stderr and return nonzero.
int cli_main(int argc, char** argv);

}  // namespace fsp
