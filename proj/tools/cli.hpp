#pragma once

// Command-line front end: synth, build-dataset, train, eval, serve, replay,
// plot. Every command writes a RunManifest next to its outputs.
//
// Option values resolve as: command-line flag, then WIP_<NAME> environment
// variable (upper case, dashes as underscores), then the JSON config file
// given by --config / WIP_CONFIG, then the built-in default. Config keys are
// option names without dashes, either at top level or nested under the
// command name (nested wins):
//   {"seed": 3, "train": {"epochs": 80, "mode": "source-only"}}

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace wip::cli {

struct ArtifactHash {
  std::string path;
  std::string sha256;
};

struct RunManifest {
  std::string command;
  nlohmann::json config;  // resolved options, same layout as a config file
  std::uint64_t seed = 0;
  std::vector<ArtifactHash> inputs;
  std::vector<ArtifactHash> outputs;
  std::string started_at;  // UTC, ISO 8601
  double wall_clock_seconds = 0;
  nlohmann::json results = nlohmann::json::object();

  nlohmann::json to_json() const;
};

// Runs one command; returns the process exit code. args excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Raises glibc's mmap and trim thresholds so the training loop's large
// temporaries are reused instead of returned to the kernel every step.
void tune_allocator();

}  // namespace wip::cli
