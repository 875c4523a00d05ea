#include "pipeline.hpp"

#include "vaxho/error.hpp"
#include "vaxho/hdfe.hpp"
#include "vaxho/panel.hpp"
#include "vaxho/parallel.hpp"
#include "vaxho/report.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>
#include <map>
#include <set>

namespace vaxho::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFitDir = "fits";
constexpr const char* kSummaryFile = "summary.csv";
constexpr const char* kTablesFile = "tables.txt";
constexpr const char* kPanelFile = "panel.csv";

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  out << text;
}

std::string replace_year(std::string pattern, int year) {
  const auto pos = pattern.find("{year}");
  if (pos == std::string::npos) throw ConfigError(fmt::format("wiot pattern '{}' lacks {{year}}", pattern));
  pattern.replace(pos, 6, std::to_string(year));
  return pattern;
}

void read_synth(const KeyValueConfig& kv, synth::WorldParams& p) {
  auto size = [&](const char* key, std::size_t& field) {
    if (auto v = kv.get_int(key)) {
      if (*v < 0) throw ConfigError(fmt::format("{} must be nonnegative", key));
      field = static_cast<std::size_t>(*v);
    }
  };
  auto real = [&](const char* key, double& field) {
    if (auto v = kv.get_double(key)) field = *v;
  };
  size("synth.countries", p.countries);
  size("synth.industries", p.industries);
  size("synth.years", p.years);
  if (auto v = kv.get_int("synth.first_year")) p.first_year = static_cast<int>(*v);
  if (auto v = kv.get_double_list("synth.labor_shares")) p.labor_shares = *v;
  if (auto v = kv.get_double_list("synth.log_endowments")) p.log_endowments = *v;
  real("synth.share_noise", p.share_noise);
  real("synth.intermediate_density", p.intermediate_density);
  real("synth.intermediate_strength", p.intermediate_strength);
  real("synth.final_demand_scale", p.final_demand_scale);
  real("synth.domestic_share", p.domestic_share);
  real("synth.kappa", p.kappa);
  real("synth.beta1", p.beta1);
  real("synth.noise_sigma", p.noise_sigma);
  real("synth.effect_sigma", p.effect_sigma);
  real("synth.wage", p.wage);
  real("synth.rental", p.rental);
  real("synth.skill_noise", p.skill_noise);
}

std::vector<fs::path> vax_paths(const PipelineConfig& cfg) {
  std::vector<fs::path> out;
  for (int y : cfg.years) out.push_back(cfg.output_dir / fmt::format("vax_{}.csv", y));
  return out;
}

hdfe::RegressionSpec configure(hdfe::RegressionSpec spec, const PipelineConfig& cfg) {
  spec.vcov = hdfe::parse_vcov(cfg.vcov);
  spec.demean_tol = cfg.demean_tol;
  spec.max_iter = cfg.max_iter;
  spec.threads = cfg.threads;
  return spec;
}

std::string year_list(const std::vector<int>& years) {
  std::vector<std::string> parts;
  for (int y : years) parts.push_back(std::to_string(y));
  return fmt::format("{}", fmt::join(parts, ","));
}

// Table 1 column order: compensation, compensation + skill, physical,
// physical + skill.
const std::vector<std::pair<std::string, std::string>>& table1_columns() {
  static const std::vector<std::pair<std::string, std::string>> cols = {
      {"comp", "(1) comp"}, {"comp_skill", "(2) comp+skill"},
      {"phys", "(3) phys"}, {"phys_skill", "(4) phys+skill"}};
  return cols;
}

struct Tables {
  std::vector<report::TableColumn> table1, table2, table3, other;
};

Tables classify(const std::vector<hdfe::RegressionFit>& fits) {
  Tables t;
  std::set<std::string> sections;
  for (auto s : panel::kBroadIndustries) sections.insert(std::string(s));
  for (const auto& fit : fits) {
    bool placed = false;
    for (const auto& [name, label] : table1_columns()) {
      if (fit.spec == name) {
        t.table1.push_back({label, fit});
        placed = true;
      }
    }
    if (placed) continue;
    if (fit.spec.rfind("comp_", 0) == 0) {
      const auto suffix = fit.spec.substr(5);
      if (sections.count(suffix)) {
        t.table2.push_back({suffix, fit});
        continue;
      }
      if (suffix.size() == 4 && std::all_of(suffix.begin(), suffix.end(), ::isdigit)) {
        t.table3.push_back({suffix, fit});
        continue;
      }
    }
    t.other.push_back({fit.spec, fit});
  }
  return t;
}

std::string render_tables(const std::vector<hdfe::RegressionFit>& fits) {
  const auto t = classify(fits);
  std::string out;
  auto add = [&](const std::string& title, const std::vector<report::TableColumn>& cols) {
    if (cols.empty()) return;
    if (!out.empty()) out += "\n";
    out += report::format_table(title, cols);
  };
  add("Table 1. Regression results", t.table1);
  add("Table 2. Results per broad industry category", t.table2);
  add("Table 3. Results for selected years", t.table3);
  add("Additional specifications", t.other);
  return out;
}

}  // namespace

fs::path PipelineConfig::wiot_path(int year) const { return replace_year(wiot_pattern, year); }

PipelineConfig load_config(const GlobalOptions& global) {
  PipelineConfig cfg;
  KeyValueConfig kv;
  if (global.config) {
    if (!fs::exists(*global.config)) throw ConfigError(fmt::format("config file {} not found", global.config->string()));
    kv = KeyValueConfig::load(*global.config);
  }
  const fs::path base = global.config ? kv.base_dir() : fs::current_path();
  auto resolve = [&](const std::string& v) { return global.config ? kv.resolve_path(v) : fs::path(v); };

  if (auto v = kv.get_string("wiot")) cfg.wiot_pattern = *v;
  cfg.wiot_pattern = (base / cfg.wiot_pattern).string();
  if (auto v = kv.get_string("sea")) cfg.sea = resolve(*v);
  else cfg.sea = base / "sea.csv";
  if (auto v = kv.get_string("concordance")) {
    if (!v->empty()) cfg.concordance = resolve(*v);
  }
  if (auto v = kv.get_string("output_dir")) cfg.output_dir = resolve(*v);
  else cfg.output_dir = base / "out";
  if (auto v = kv.get_years("years")) cfg.years = *v;
  if (auto v = kv.get_int("threads")) {
    if (*v < 1) throw ConfigError("threads must be at least 1");
    cfg.threads = static_cast<unsigned>(*v);
  }
  if (auto v = kv.get_int("seed")) cfg.seed = static_cast<std::uint64_t>(*v);

  auto tol = [&](const char* key, double& field) {
    if (auto v = kv.get_double(key)) {
      if (!(*v > 0.0)) throw ConfigError(fmt::format("{} must be positive", key));
      field = *v;
    }
  };
  tol("tolerances.balance", cfg.tolerances.balance_tol);
  tol("tolerances.coefficient", cfg.tolerances.coeff_tol);
  tol("tolerances.solve", cfg.tolerances.solve_tol);
  tol("tolerances.pivot_floor", cfg.tolerances.pivot_floor);
  tol("tolerances.output_floor", cfg.tolerances.output_floor);
  tol("tolerances.identity", cfg.tolerances.identity_tol);

  if (auto v = kv.get_string("estimate.vcov")) cfg.vcov = *v;
  try {
    hdfe::parse_vcov(cfg.vcov);
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("estimate.vcov: unknown flavor '{}'", cfg.vcov));
  }
  tol("estimate.demean_tol", cfg.demean_tol);
  if (auto v = kv.get_int("estimate.max_iter")) {
    if (*v < 1) throw ConfigError("estimate.max_iter must be at least 1");
    cfg.max_iter = static_cast<std::size_t>(*v);
  }
  if (auto v = kv.get_int("estimate.min_obs")) {
    if (*v < 0) throw ConfigError("estimate.min_obs must be nonnegative");
    cfg.min_obs = static_cast<std::size_t>(*v);
  }
  if (auto v = kv.get_bool("estimate.table1")) cfg.table1 = *v;
  if (auto v = kv.get_bool("estimate.table2")) cfg.table2 = *v;
  if (auto v = kv.get_bool("estimate.table3")) cfg.table3 = *v;
  if (auto v = kv.get_years("estimate.table3_years")) cfg.table3_years = *v;
  if (auto v = kv.get_list("estimate.specs")) {
    for (const auto& s : *v) cfg.spec_files.push_back(resolve(s));
  }

  read_synth(kv, cfg.synth);
  kv.reject_unused();

  if (global.threads) {
    if (*global.threads < 1) throw ConfigError("--threads must be at least 1");
    cfg.threads = *global.threads;
  }
  if (global.seed) cfg.seed = *global.seed;
  cfg.synth.seed = cfg.seed;
  return cfg;
}

void require_inputs(const PipelineConfig& cfg, bool wiot, bool sea) {
  if (cfg.years.empty()) throw ConfigError("no years configured");
  if (wiot) {
    for (int y : cfg.years) {
      const auto p = cfg.wiot_path(y);
      if (!fs::exists(p)) throw ConfigError(fmt::format("input table {} not found", p.string()));
    }
  }
  if (sea) {
    if (!fs::exists(cfg.sea)) throw ConfigError(fmt::format("SEA file {} not found", cfg.sea.string()));
    if (cfg.concordance && !fs::exists(*cfg.concordance)) {
      throw ConfigError(fmt::format("concordance file {} not found", cfg.concordance->string()));
    }
  }
}

int cmd_ingest(const PipelineConfig& cfg) {
  require_inputs(cfg, true, true);
  std::vector<std::string> lines(cfg.years.size());
  parallel_for(cfg.years.size(), cfg.threads, [&](std::size_t k) {
    const int year = cfg.years[k];
    const auto t = io::load_wiot(cfg.wiot_path(year), year, cfg.tolerances);
    const auto violations = io::row_balance_violations(t, cfg.tolerances.balance_tol);
    lines[k] = fmt::format("{}: countries={} industries={} N={} balance_violations={}\n", year,
                           t.country_count(), t.industry_count(), t.size(), violations.size());
  });
  const auto sea = panel::load_sea(cfg.sea);
  std::string out;
  for (const auto& l : lines) out += l;
  out += fmt::format("sea: {} records\n", sea.size());
  if (cfg.concordance) {
    const auto conc = panel::Concordance::load(*cfg.concordance);
    out += fmt::format("concordance: {} entries\n", conc.entries().size());
  }
  fs::create_directories(cfg.output_dir);
  write_text(cfg.output_dir / "ingest_summary.txt", out);
  fmt::print("{}", out);
  return 0;
}

int cmd_decompose(const PipelineConfig& cfg, bool allow_slack) {
  require_inputs(cfg, true, false);
  fs::create_directories(cfg.output_dir);
  std::vector<io::AccountingReport> reports(cfg.years.size());
  parallel_for(cfg.years.size(), cfg.threads, [&](std::size_t k) {
    const int year = cfg.years[k];
    const auto t = io::load_wiot(cfg.wiot_path(year), year, cfg.tolerances);
    const auto sys = io::build_tech_system(t, cfg.tolerances);
    const auto vx = io::compute_vax(sys, t, cfg.tolerances);
    io::write_vax_csv(vx, cfg.output_dir / fmt::format("vax_{}.csv", year));
    reports[k] = io::accounting_report(t, sys, vx, cfg.tolerances);
    write_text(cfg.output_dir / fmt::format("report_{}.txt", year), io::format_report(reports[k], t));
  });

  bool gdp_breach = false, balance_breach = false;
  for (std::size_t k = 0; k < reports.size(); ++k) {
    const auto& r = reports[k];
    for (const auto& f : r.flags) spdlog::warn("{}: {}", cfg.years[k], f);
    gdp_breach = gdp_breach || !r.gdp_ok();
    balance_breach = balance_breach || !r.balance_ok();
  }
  spdlog::info("decomposed {} year(s) into {}", cfg.years.size(), cfg.output_dir.string());
  if (allow_slack || (!gdp_breach && !balance_breach)) return 0;
  if (gdp_breach) {
    spdlog::error("GDP identity outside tolerance; rerun with --allow-slack to accept");
    return static_cast<int>(ExitCode::kNumericalError);
  }
  spdlog::error("row balance outside tolerance; rerun with --allow-slack to accept");
  return static_cast<int>(ExitCode::kDataError);
}

int cmd_panel(const PipelineConfig& cfg) {
  require_inputs(cfg, false, true);
  const auto files = vax_paths(cfg);
  for (const auto& f : files) {
    if (!fs::exists(f)) throw ConfigError(fmt::format("{} not found; run decompose first", f.string()));
  }
  const auto p = panel::build_panel(files, cfg.sea, cfg.concordance, {cfg.threads});
  fs::create_directories(cfg.output_dir);
  panel::write_panel_csv(p, cfg.output_dir / kPanelFile);
  write_text(cfg.output_dir / "panel_ledger.txt", p.format_ledger());
  spdlog::info("panel: {} rows", p.rows.size());
  return 0;
}

int cmd_estimate(const PipelineConfig& cfg, const std::optional<std::vector<int>>& years) {
  const auto panel_path = cfg.output_dir / kPanelFile;
  if (!fs::exists(panel_path)) throw ConfigError(fmt::format("{} not found; run panel first", panel_path.string()));
  const auto p = panel::read_panel_csv(panel_path);

  std::vector<hdfe::RegressionFit> fits;
  auto run = [&](const hdfe::RegressionSpec& spec) {
    try {
      fits.push_back(hdfe::estimate(p, spec));
    } catch (const DataError& e) {
      spdlog::warn("specification '{}' skipped: {}", spec.name, e.what());
    }
  };

  if (cfg.table1 && !years) {
    for (auto intensity : {hdfe::Intensity::kCompensation, hdfe::Intensity::kPhysical}) {
      run(configure(hdfe::RegressionSpec::baseline(intensity), cfg));
      run(configure(hdfe::RegressionSpec::extended(intensity), cfg));
    }
    std::stable_sort(fits.begin(), fits.end(), [](const auto& a, const auto& b) {
      auto rank = [](const std::string& s) {
        const auto& cols = table1_columns();
        for (std::size_t k = 0; k < cols.size(); ++k)
          if (cols[k].first == s) return k;
        return cols.size();
      };
      return rank(a.spec) < rank(b.spec);
    });
  }
  const auto base = configure(hdfe::RegressionSpec::baseline(hdfe::Intensity::kCompensation), cfg);
  if (cfg.table2 && !years) {
    std::vector<std::string> sections(panel::kBroadIndustries.begin(), panel::kBroadIndustries.end() - 1);
    for (auto& g : hdfe::estimate_by_group(p, base, hdfe::Grouping::kBroadIndustry, cfg.min_obs, sections,
                                           cfg.threads)) {
      fits.push_back(std::move(g.fit));
    }
  }
  if (cfg.table3 || years) {
    std::vector<int> wanted = years ? *years : cfg.table3_years;
    std::vector<std::string> only;
    for (int y : wanted) only.push_back(std::to_string(y));
    for (auto& g : hdfe::estimate_by_group(p, base, hdfe::Grouping::kYear, years ? 0 : cfg.min_obs, only,
                                           cfg.threads)) {
      fits.push_back(std::move(g.fit));
    }
    if (years && fits.size() != years->size()) {
      throw DataError(fmt::format("requested years {} but only {} could be estimated", year_list(*years),
                                  fits.size()));
    }
  }
  if (!years) {
    for (const auto& path : cfg.spec_files) {
      if (!fs::exists(path)) throw ConfigError(fmt::format("spec file {} not found", path.string()));
      run(configure(hdfe::parse_spec(KeyValueConfig::load(path)), cfg));
    }
  }
  if (fits.empty()) throw DataError("no specification could be estimated");

  const auto fit_dir = cfg.output_dir / kFitDir;
  fs::create_directories(fit_dir);
  for (const auto& f : fits) report::write_fit_csv(f, fit_dir / (f.spec + ".csv"));
  report::write_summary_csv(fits, cfg.output_dir / kSummaryFile);
  const auto text = render_tables(fits);
  write_text(cfg.output_dir / kTablesFile, text);
  fmt::print("{}", text);
  return 0;
}

int cmd_synth(const PipelineConfig& cfg, const fs::path& out_dir) {
  const auto params = synth::complete(cfg.synth);
  params.validate();
  const auto world = synth::generate_world(params, cfg.threads);
  synth::write_world(world, out_dir);

  std::string text = "# synthetic world\n";
  text += "wiot = wiot_{year}.csv\n";
  text += "sea = sea.csv\n";
  text += "concordance = concordance.csv\n";
  text += "output_dir = out\n";
  text += fmt::format("years = {}-{}\n", params.first_year,
                      params.first_year + static_cast<int>(params.years) - 1);
  text += fmt::format("seed = {}\n", params.seed);
  text += "\n[estimate]\nmin_obs = 30\n";
  write_text(out_dir / "vaxho.cfg", text);
  spdlog::info("synthetic world with {} countries, {} industries, {} years written to {}", params.countries,
               params.industries, params.years, out_dir.string());
  return 0;
}

int cmd_report(const PipelineConfig& cfg) {
  const auto summary = cfg.output_dir / kSummaryFile;
  if (!fs::exists(summary)) throw ConfigError(fmt::format("{} not found; run estimate first", summary.string()));
  std::vector<std::string> specs;
  {
    std::ifstream in(summary);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      specs.push_back(line.substr(0, line.find(',')));
    }
  }
  std::vector<hdfe::RegressionFit> fits;
  for (const auto& s : specs) {
    fits.push_back(report::read_fit(s, cfg.output_dir / kFitDir / (s + ".csv"), summary));
  }
  std::string text = render_tables(fits);
  for (int y : cfg.years) {
    const auto rp = cfg.output_dir / fmt::format("report_{}.txt", y);
    if (!fs::exists(rp)) continue;
    std::ifstream in(rp);
    text += fmt::format("\nAccounting report {}\n", y);
    text += std::string(std::istreambuf_iterator<char>(in), {});
  }
  fmt::print("{}", text);
  return 0;
}

}  // namespace vaxho::cli
