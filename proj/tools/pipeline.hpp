#pragma once

#include "vaxho/config.hpp"
#include "vaxho/iotable.hpp"
#include "vaxho/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace vaxho::cli {

struct GlobalOptions {
  std::optional<std::filesystem::path> config;
  std::optional<unsigned> threads;
  std::optional<std::uint64_t> seed;
  bool allow_slack = false;
};

struct PipelineConfig {
  std::string wiot_pattern = "wiot_{year}.csv";  // relative to the config file
  std::filesystem::path sea;
  std::optional<std::filesystem::path> concordance;
  std::filesystem::path output_dir = "out";
  std::vector<int> years;
  unsigned threads = 1;
  std::uint64_t seed = 42;
  io::Tolerances tolerances;

  std::string vcov = "HC1";
  double demean_tol = 1e-8;
  std::size_t max_iter = 500;
  std::size_t min_obs = 100;
  bool table1 = true;
  bool table2 = true;
  bool table3 = true;
  std::vector<int> table3_years;  // empty: every panel year
  std::vector<std::filesystem::path> spec_files;

  synth::WorldParams synth;

  std::filesystem::path wiot_path(int year) const;
};

// Reads the key-value config; global flags override file values. Unknown keys
// are a ConfigError.
PipelineConfig load_config(const GlobalOptions& global);

void require_inputs(const PipelineConfig& cfg, bool wiot, bool sea);

int cmd_ingest(const PipelineConfig& cfg);
int cmd_decompose(const PipelineConfig& cfg, bool allow_slack);
int cmd_panel(const PipelineConfig& cfg);
int cmd_estimate(const PipelineConfig& cfg, const std::optional<std::vector<int>>& years);
int cmd_synth(const PipelineConfig& cfg, const std::filesystem::path& out_dir);
int cmd_report(const PipelineConfig& cfg);

}  // namespace vaxho::cli
