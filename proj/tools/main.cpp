#include "pipeline.hpp"

#include "vaxho/config.hpp"
#include "vaxho/error.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

namespace {

int exit_code(vaxho::ExitCode code) { return static_cast<int>(code); }

}  // namespace

int main(int argc, char** argv) {
  using namespace vaxho;

  CLI::App app{"Value-added trade decomposition and factor-proportions panel regressions"};
  app.require_subcommand(1);

  cli::GlobalOptions global;
  std::string config_path;
  unsigned threads = 0;
  std::uint64_t seed = 0;
  bool verbose = false, quiet = false;
  app.add_option("--config", config_path, "Key-value pipeline configuration file");
  auto* threads_opt = app.add_option("--threads", threads, "Worker threads");
  auto* seed_opt = app.add_option("--seed", seed, "Seed for all randomness");
  app.add_flag("--allow-slack", global.allow_slack, "Exit 0 even when accounting tolerances are breached");
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Only log errors");

  auto* ingest = app.add_subcommand("ingest", "Load and validate every input table");
  auto* decompose = app.add_subcommand("decompose", "Write value-added export matrices and accounting reports");
  auto* panel = app.add_subcommand("panel", "Build the regression panel from the value-added exports");
  auto* estimate = app.add_subcommand("estimate", "Run the fixed-effects regressions and write tables");
  auto* synth = app.add_subcommand("synth", "Generate a synthetic input bundle");
  auto* report = app.add_subcommand("report", "Re-render tables from written fits");

  std::string years_text;
  std::vector<std::string> spec_files;
  estimate->add_option("--years", years_text, "Only the per-year fits for these years, e.g. 2000,2007,2014");
  estimate->add_option("--spec", spec_files, "Run only these specification files");

  std::string out_dir;
  std::optional<std::size_t> countries, industries, num_years;
  std::optional<int> first_year;
  std::optional<double> kappa;
  std::vector<double> labor_shares;
  synth->add_option("--out", out_dir, "Output directory")->required();
  synth->add_option("--countries", countries, "Number of countries");
  synth->add_option("--industries", industries, "Number of industries");
  synth->add_option("--num-years", num_years, "Number of years");
  synth->add_option("--first-year", first_year, "First year");
  synth->add_option("--kappa", kappa, "Planted interaction coefficient");
  synth->add_option("--labor-shares", labor_shares, "Labor share per industry")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code(ExitCode::kConfigError);
  }

  auto logger = spdlog::stderr_logger_st("vaxho");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(quiet ? spdlog::level::err : verbose ? spdlog::level::debug : spdlog::level::info);

  if (!config_path.empty()) global.config = config_path;
  if (*threads_opt) global.threads = threads;
  if (*seed_opt) global.seed = seed;

  try {
    auto cfg = cli::load_config(global);
    if (*ingest) return cli::cmd_ingest(cfg);
    if (*decompose) return cli::cmd_decompose(cfg, global.allow_slack);
    if (*panel) return cli::cmd_panel(cfg);
    if (*estimate) {
      std::optional<std::vector<int>> years;
      if (!years_text.empty()) {
        try {
          years = parse_year_list(years_text);
        } catch (const std::exception& e) {
          throw ConfigError(std::string("--years: ") + e.what());
        }
      }
      if (!spec_files.empty()) {
        cfg.table1 = cfg.table2 = cfg.table3 = false;
        cfg.spec_files.assign(spec_files.begin(), spec_files.end());
      }
      return cli::cmd_estimate(cfg, years);
    }
    if (*synth) {
      if (countries) cfg.synth.countries = *countries;
      if (industries) cfg.synth.industries = *industries;
      if (num_years) cfg.synth.years = *num_years;
      if (first_year) cfg.synth.first_year = *first_year;
      if (kappa) cfg.synth.kappa = *kappa;
      if (!labor_shares.empty()) cfg.synth.labor_shares = labor_shares;
      return cli::cmd_synth(cfg, out_dir);
    }
    if (*report) return cli::cmd_report(cfg);
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return exit_code(ExitCode::kConfigError);
  } catch (const DataError& e) {
    spdlog::error("{}", e.what());
    return exit_code(ExitCode::kDataError);
  } catch (const NumericalError& e) {
    spdlog::error("{}", e.what());
    return exit_code(ExitCode::kNumericalError);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
