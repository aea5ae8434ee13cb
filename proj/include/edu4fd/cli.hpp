#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "edu4fd/corpus.hpp"
#include "edu4fd/discourse.hpp"
#include "edu4fd/evaluation.hpp"
#include "edu4fd/model.hpp"
#include "edu4fd/training.hpp"

namespace edu4fd {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitIo = 2,
  kExitInvalid = 3,
  kExitNonFinite = 4,
};

struct DataConfig {
  std::filesystem::path corpus;
  std::vector<std::pair<std::string, std::filesystem::path>> test_sets;
  PipelineOptions pipeline;
  std::size_t min_count = 1;
  SplitSpec split;
};

/// Everything a run needs. Loaded from JSON; relative paths resolve against
/// the config file's directory.
struct RunConfig {
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  std::uint64_t seed = 0;
  std::size_t trials = kDefaultTrials;

  /// Propagates `seed` into the split and training seeds.
  void set_seed(std::uint64_t s);
  void validate() const;
};

/// Unknown keys are rejected.
RunConfig run_config_from_json(std::string_view json_text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& c);

/// Entry point shared by the executable and the tests. args[0] is the
/// program name. Data goes to `out`; diagnostics go through edu4fd::log.
int run_cli(const std::vector<std::string>& args, std::ostream& out);

}  // namespace edu4fd
