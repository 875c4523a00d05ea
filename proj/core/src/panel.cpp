#include "vaxho/panel.hpp"

#include "vaxho/csv.hpp"
#include "vaxho/error.hpp"
#include "vaxho/parallel.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>

namespace vaxho::panel {

namespace {

constexpr std::string_view kSeaHeader = "country,industry,year,lab_comp,cap_comp,va,hours,cap_stock,h_hs,h_ms,h_ls";
constexpr std::string_view kConcordanceHeader = "source_industry,target_industry,weight";

bool positive(const std::optional<double>& v) { return v && std::isfinite(*v) && *v > 0.0; }
bool negative(const std::optional<double>& v) { return v && *v < 0.0; }

bool has_negative_input(const SEARecord& r) {
  return negative(r.labor_compensation) || negative(r.capital_compensation) || negative(r.hours_worked) ||
         negative(r.capital_stock);
}

std::string optional_exact(const std::optional<double>& v) { return v ? csv::format_exact(*v) : std::string(); }

std::string optional_sig(const std::optional<double>& v) {
  return v ? csv::format_significant(*v, 12) : std::string();
}

std::optional<double> log_of(const std::optional<double>& v) {
  if (!positive(v)) return std::nullopt;
  return std::log(*v);
}

struct FlagName {
  Flag flag;
  std::string_view name;
};

constexpr std::array<FlagName, 9> kFlagNames = {{
    {kNonPositiveVax, "nonpositive_vax"},
    {kNoSea, "no_sea"},
    {kNegativeInput, "negative_input"},
    {kNoCompIntensity, "no_comp_intensity"},
    {kNoCompEndowment, "no_comp_endowment"},
    {kNoPhysIntensity, "no_phys_intensity"},
    {kNoPhysEndowment, "no_phys_endowment"},
    {kNoSkillIntensity, "no_skill_intensity"},
    {kNoSkillEndowment, "no_skill_endowment"},
}};

// Exclusion rules per sample, in charging order.
std::vector<Flag> sample_rules(Sample sample) {
  std::vector<Flag> rules = {kNonPositiveVax, kNoSea};
  const bool comp = sample == Sample::kCompensation || sample == Sample::kCompensationSkill;
  if (comp) {
    rules.push_back(kNoCompIntensity);
    rules.push_back(kNoCompEndowment);
  } else {
    rules.push_back(kNoPhysIntensity);
    rules.push_back(kNoPhysEndowment);
  }
  if (sample == Sample::kCompensationSkill || sample == Sample::kPhysicalSkill) {
    rules.push_back(kNoSkillIntensity);
    rules.push_back(kNoSkillEndowment);
  }
  return rules;
}

std::string_view flag_name(Flag f) {
  for (const auto& fn : kFlagNames) {
    if (fn.flag == f) return fn.name;
  }
  return "unknown";
}

void check_unique_sea(const std::vector<SEARecord>& sea) {
  std::map<CountryIndustryYear, std::size_t> seen;
  for (std::size_t k = 0; k < sea.size(); ++k) {
    const auto& r = sea[k];
    auto [it, inserted] = seen.emplace(CountryIndustryYear{r.country, r.industry, r.year}, k);
    if (!inserted) {
      throw DataError(fmt::format("duplicate SEA record for ({}, {}, {})", r.country, r.industry, r.year));
    }
  }
}

int peek_vax_year(const std::filesystem::path& path) {
  csv::Reader reader(path);
  reader.expect_header("year,origin_country,origin_industry,dest_country,vax");
  if (!reader.next()) throw DataError(fmt::format("{}: no rows", path.string()));
  return static_cast<int>(reader.integer(0));
}

}  // namespace

std::vector<SEARecord> load_sea(const std::filesystem::path& path) {
  csv::Reader reader(path);
  reader.expect_header(kSeaHeader);
  std::vector<SEARecord> out;
  while (reader.next()) {
    if (reader.size() != 8 && reader.size() != 11) {
      throw ParseError(reader.path(), reader.line_number(), reader.size() + 1,
                       fmt::format("expected 8 or 11 fields, found {}", reader.size()));
    }
    SEARecord r;
    r.country = std::string(reader.field(0));
    r.industry = std::string(reader.field(1));
    if (r.country.empty() || r.industry.empty()) {
      throw ParseError(reader.path(), reader.line_number(), r.country.empty() ? 1 : 2, "empty label");
    }
    r.year = static_cast<int>(reader.integer(2));
    r.labor_compensation = reader.optional_number(3);
    r.capital_compensation = reader.optional_number(4);
    r.value_added = reader.optional_number(5);
    r.hours_worked = reader.optional_number(6);
    r.capital_stock = reader.optional_number(7);
    r.hours_high_skill = reader.optional_number(8);
    r.hours_medium_skill = reader.optional_number(9);
    r.hours_low_skill = reader.optional_number(10);
    const int skill_fields = r.hours_high_skill.has_value() + r.hours_medium_skill.has_value() +
                             r.hours_low_skill.has_value();
    if (skill_fields != 0 && skill_fields != 3) {
      throw ParseError(reader.path(), reader.line_number(), 9,
                       "skill hours must be given for all three classes or none");
    }
    if (!r.capital_compensation && r.value_added && r.labor_compensation) {
      r.capital_compensation = *r.value_added - *r.labor_compensation;
      r.capital_compensation_derived = true;
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_sea(const std::vector<SEARecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  out << kSeaHeader << '\n';
  for (const auto& r : records) {
    const auto cap = r.capital_compensation_derived ? std::optional<double>{} : r.capital_compensation;
    out << r.country << ',' << r.industry << ',' << r.year << ',' << optional_exact(r.labor_compensation) << ','
        << optional_exact(cap) << ',' << optional_exact(r.value_added) << ',' << optional_exact(r.hours_worked)
        << ',' << optional_exact(r.capital_stock) << ',' << optional_exact(r.hours_high_skill) << ','
        << optional_exact(r.hours_medium_skill) << ',' << optional_exact(r.hours_low_skill) << '\n';
  }
}

Concordance::Concordance(std::vector<ConcordanceEntry> entries) : entries_(std::move(entries)) {
  std::map<std::string, double> sums;
  for (const auto& e : entries_) {
    if (!std::isfinite(e.weight) || e.weight < 0.0) {
      throw DataError(fmt::format("concordance weight {} for {} -> {} is not a nonnegative number", e.weight,
                                  e.source_industry, e.target_industry));
    }
    by_source_[e.source_industry].emplace_back(e.target_industry, e.weight);
    sums[e.source_industry] += e.weight;
  }
  for (const auto& [source, sum] : sums) {
    if (std::abs(sum - 1.0) > 1e-6) {
      throw DataError(fmt::format("concordance weights for source industry '{}' sum to {:.9g}, expected 1",
                                  source, sum));
    }
  }
}

Concordance Concordance::load(const std::filesystem::path& path) {
  csv::Reader reader(path);
  reader.expect_header(kConcordanceHeader);
  std::vector<ConcordanceEntry> entries;
  while (reader.next()) {
    if (reader.size() != 3) {
      throw ParseError(reader.path(), reader.line_number(), reader.size() + 1, "expected 3 fields");
    }
    entries.push_back({std::string(reader.field(0)), std::string(reader.field(1)), reader.number(2)});
  }
  return Concordance(std::move(entries));
}

std::vector<std::pair<std::string, double>> Concordance::targets(const std::string& source) const {
  if (is_identity()) return {{source, 1.0}};
  auto it = by_source_.find(source);
  if (it == by_source_.end()) return {};
  return it->second;
}

void write_concordance(const std::vector<ConcordanceEntry>& entries, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  out << kConcordanceHeader << '\n';
  for (const auto& e : entries) {
    out << e.source_industry << ',' << e.target_industry << ',' << csv::format_exact(e.weight) << '\n';
  }
}

RatioTables intensities_and_endowments(const std::vector<SEARecord>& sea, int year) {
  check_unique_sea(sea);
  RatioTables out;
  struct Sums {
    double lab = 0, cap = 0, hours = 0, stock = 0;
    bool any_comp = false, any_phys = false;
  };
  std::map<CountryYear, Sums> sums;
  for (const auto& r : sea) {
    if (year != 0 && r.year != year) continue;
    auto& s = sums[{r.country, r.year}];
    IndustryRatios ratios;
    if (has_negative_input(r)) ++out.ledger.negative_inputs;
    if (positive(r.labor_compensation) && positive(r.capital_compensation)) {
      ratios.lk_comp = *r.labor_compensation / *r.capital_compensation;
      s.lab += *r.labor_compensation;
      s.cap += *r.capital_compensation;
      s.any_comp = true;
    } else {
      ++out.ledger.comp_invalid;
    }
    if (positive(r.hours_worked) && positive(r.capital_stock)) {
      ratios.lk_phys = *r.hours_worked / *r.capital_stock;
      s.hours += *r.hours_worked;
      s.stock += *r.capital_stock;
      s.any_phys = true;
    } else {
      ++out.ledger.phys_invalid;
    }
    out.industry.emplace(CountryIndustryYear{r.country, r.industry, r.year}, ratios);
  }
  for (const auto& [key, s] : sums) {
    CountryRatios c;
    if (s.any_comp) {
      c.LK_comp = s.lab / s.cap;
    } else {
      ++out.ledger.countries_without_comp;
    }
    if (s.any_phys) {
      c.LK_phys = s.hours / s.stock;
    } else {
      ++out.ledger.countries_without_phys;
    }
    out.country.emplace(key, c);
  }
  return out;
}

SkillTables skill_ratios(const std::vector<SEARecord>& sea, const Concordance& concordance) {
  SkillTables out;
  std::map<CountryIndustryYear, std::array<double, 3>> mapped;
  for (const auto& r : sea) {
    if (!r.has_skill()) {
      ++out.missing;
      continue;
    }
    const std::array<double, 3> hours = {*r.hours_high_skill, *r.hours_medium_skill, *r.hours_low_skill};
    if (std::any_of(hours.begin(), hours.end(), [](double h) { return !std::isfinite(h) || h < 0.0; })) {
      ++out.missing;
      continue;
    }
    const auto targets = concordance.targets(r.industry);
    if (targets.empty()) {
      throw DataError(fmt::format("SEA record ({}, {}, {}) carries skill hours but the concordance has no "
                                  "entry for industry '{}'",
                                  r.country, r.industry, r.year, r.industry));
    }
    for (const auto& [target, weight] : targets) {
      auto& acc = mapped[{r.country, target, r.year}];
      for (int k = 0; k < 3; ++k) acc[k] += weight * hours[k];
    }
  }
  std::map<CountryYear, std::array<double, 3>> country;
  for (const auto& [key, h] : mapped) {
    const auto& [c, industry, year] = key;
    const double unskilled = h[1] + h[2];
    if (h[0] > 0.0 && unskilled > 0.0) out.industry.emplace(key, h[0] / unskilled);
    auto& acc = country[{c, year}];
    for (int k = 0; k < 3; ++k) {
      acc[k] += h[k];
      out.totals[{c, year, k}] += h[k];
    }
  }
  for (const auto& [key, h] : country) {
    const double unskilled = h[1] + h[2];
    if (h[0] > 0.0 && unskilled > 0.0) out.country.emplace(key, h[0] / unskilled);
  }
  return out;
}

std::string flags_to_string(std::uint32_t flags) {
  std::string out;
  for (const auto& fn : kFlagNames) {
    if (flags & fn.flag) {
      if (!out.empty()) out += '|';
      out += fn.name;
    }
  }
  return out;
}

std::uint32_t flags_from_string(std::string_view text) {
  std::uint32_t flags = 0;
  if (text.empty()) return flags;
  for (const auto part : csv::split(text, '|')) {
    bool found = false;
    for (const auto& fn : kFlagNames) {
      if (fn.name == part) {
        flags |= fn.flag;
        found = true;
      }
    }
    if (!found) throw DataError(fmt::format("unknown panel flag '{}'", part));
  }
  return flags;
}

std::string to_string(Sample sample) {
  switch (sample) {
    case Sample::kCompensation:
      return "compensation";
    case Sample::kPhysical:
      return "physical";
    case Sample::kCompensationSkill:
      return "compensation+skill";
    case Sample::kPhysicalSkill:
      return "physical+skill";
  }
  return "unknown";
}

bool in_sample(const PanelRow& row, Sample sample) {
  for (const auto rule : sample_rules(sample)) {
    if (row.flags & rule) return false;
  }
  return true;
}

std::size_t SampleLedger::dropped_total() const {
  std::size_t total = 0;
  for (const auto& [rule, count] : dropped) total += count;
  return total;
}

SampleLedger PanelDataset::ledger(Sample sample) const {
  const auto rules = sample_rules(sample);
  std::vector<std::size_t> counts(rules.size(), 0);
  SampleLedger led;
  led.raw = rows.size();
  for (const auto& row : rows) {
    bool dropped = false;
    for (std::size_t k = 0; k < rules.size(); ++k) {
      if (row.flags & rules[k]) {
        ++counts[k];
        dropped = true;
        break;
      }
    }
    if (!dropped) ++led.retained;
  }
  for (std::size_t k = 0; k < rules.size(); ++k) led.dropped.emplace_back(std::string(flag_name(rules[k])), counts[k]);
  return led;
}

std::string PanelDataset::format_ledger() const {
  std::string out = fmt::format("rows: {}\nyears: {}-{}\n", rows.size(), first_year, last_year);
  for (const auto sample : kSamples) {
    const auto led = ledger(sample);
    out += fmt::format("sample {}: raw {}, retained {}", to_string(sample), led.raw, led.retained);
    for (const auto& [rule, count] : led.dropped) out += fmt::format(", {} {}", rule, count);
    out += '\n';
  }
  std::array<std::size_t, kFlagNames.size()> flag_counts{};
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < kFlagNames.size(); ++k) {
      if (row.flags & kFlagNames[k].flag) ++flag_counts[k];
    }
  }
  out += "flag counts:";
  for (std::size_t k = 0; k < kFlagNames.size(); ++k) {
    out += fmt::format(" {} {}{}", kFlagNames[k].name, flag_counts[k], k + 1 < kFlagNames.size() ? "," : "");
  }
  out += '\n';
  return out;
}

std::vector<Fragment> long_format(const io::VAXMatrix& vx) {
  std::vector<Fragment> out;
  const auto s = vx.industries.size();
  const auto c = vx.countries.size();
  out.reserve(vx.size() * (c > 0 ? c - 1 : 0));
  for (std::size_t row = 0; row < vx.size(); ++row) {
    const auto origin = row / s;
    for (std::size_t d = 0; d < c; ++d) {
      if (d == origin) continue;
      out.push_back({vx.countries[origin], vx.industries[row % s], vx.countries[d], vx.year,
                     vx.values(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(d))});
    }
  }
  return out;
}

PanelBuilder::PanelBuilder(const std::vector<SEARecord>& sea, const Concordance& concordance)
    : ratios_(intensities_and_endowments(sea, 0)), skills_(skill_ratios(sea, concordance)) {
  for (const auto& r : sea) sea_negative_[{r.country, r.industry, r.year}] = has_negative_input(r);
}

std::uint16_t PanelBuilder::country_id(const std::string& code) {
  auto [it, inserted] = country_ids_.emplace(code, static_cast<std::uint16_t>(panel_.countries.size()));
  if (inserted) {
    if (panel_.countries.size() >= 0xFFFF) throw DataError("too many countries");
    panel_.countries.push_back(code);
  }
  return it->second;
}

std::uint16_t PanelBuilder::industry_id(const std::string& code) {
  auto [it, inserted] = industry_ids_.emplace(code, static_cast<std::uint16_t>(panel_.industries.size()));
  if (inserted) {
    if (panel_.industries.size() >= 0xFFFF) throw DataError("too many industries");
    panel_.industries.push_back(code);
    industry_broad_.push_back(broad_industry_index(assign_broad_industry(code)));
  }
  return it->second;
}

void PanelBuilder::append(const std::vector<Fragment>& fragments) {
  panel_.rows.reserve(panel_.rows.size() + fragments.size());
  for (const auto& f : fragments) {
    PanelRow row;
    row.o = country_id(f.origin_country);
    row.d = country_id(f.destination);
    row.i = industry_id(f.industry);
    row.t = f.year;
    row.vax = f.vax;
    row.broad = industry_broad_[row.i];
    if (row.o == row.d) throw DataError(fmt::format("fragment with origin == destination '{}'", f.destination));
    const std::uint64_t key = ((static_cast<std::uint64_t>(static_cast<std::uint32_t>(f.year)) << 16 | row.o) << 16 |
                               row.d) << 16 | row.i;
    if (!keys_.insert(key).second) {
      throw DataError(fmt::format("duplicate panel key ({}, {}, {}, {})", f.origin_country, f.destination,
                                  f.industry, f.year));
    }
    if (f.vax > 0.0 && std::isfinite(f.vax)) {
      row.log_vax = std::log(f.vax);
    } else {
      row.flags |= kNonPositiveVax;
    }

    const CountryIndustryYear key_oit{f.origin_country, f.industry, f.year};
    const auto sea_it = sea_negative_.find(key_oit);
    if (sea_it == sea_negative_.end()) {
      row.flags |= kNoSea;
    } else {
      if (sea_it->second) row.flags |= kNegativeInput;
      const auto& ind = ratios_.industry.at(key_oit);
      const CountryYear key_ot{f.origin_country, f.year};
      const auto country_it = ratios_.country.find(key_ot);
      const CountryRatios country = country_it == ratios_.country.end() ? CountryRatios{} : country_it->second;

      row.log_lk_comp = log_of(ind.lk_comp);
      if (!row.log_lk_comp) row.flags |= kNoCompIntensity;
      row.log_LK_comp = log_of(country.LK_comp);
      if (!row.log_LK_comp) row.flags |= kNoCompEndowment;
      row.log_lk_phys = log_of(ind.lk_phys);
      if (!row.log_lk_phys) row.flags |= kNoPhysIntensity;
      row.log_LK_phys = log_of(country.LK_phys);
      if (!row.log_LK_phys) row.flags |= kNoPhysEndowment;

      const auto skill_it = skills_.industry.find(key_oit);
      if (skill_it != skills_.industry.end()) {
        row.log_skill_int = std::log(skill_it->second);
      } else {
        row.flags |= kNoSkillIntensity;
      }
      const auto skill_end_it = skills_.country.find(key_ot);
      if (skill_end_it != skills_.country.end()) {
        row.log_skill_end = std::log(skill_end_it->second);
      } else {
        row.flags |= kNoSkillEndowment;
      }
    }
    if (panel_.rows.empty()) {
      panel_.first_year = panel_.last_year = f.year;
    } else {
      panel_.first_year = std::min(panel_.first_year, f.year);
      panel_.last_year = std::max(panel_.last_year, f.year);
    }
    panel_.rows.push_back(row);
  }
}

PanelDataset PanelBuilder::finish() && { return std::move(panel_); }

PanelDataset join_sea(const std::vector<Fragment>& fragments, const std::vector<SEARecord>& sea,
                      const Concordance& concordance) {
  PanelBuilder builder(sea, concordance);
  builder.append(fragments);
  return std::move(builder).finish();
}

PanelDataset build_panel(const std::vector<std::filesystem::path>& vax_files, const std::filesystem::path& sea_file,
                         const std::optional<std::filesystem::path>& concordance_file, const PanelConfig& config) {
  const auto sea = load_sea(sea_file);
  const auto concordance = concordance_file ? Concordance::load(*concordance_file) : Concordance::identity();
  PanelBuilder builder(sea, concordance);

  std::vector<std::pair<int, std::filesystem::path>> ordered;
  for (const auto& f : vax_files) ordered.emplace_back(peek_vax_year(f), f);
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  // Years are reshaped in parallel batches and merged in year order.
  const std::size_t batch = std::max(1u, config.threads);
  for (std::size_t start = 0; start < ordered.size(); start += batch) {
    const std::size_t count = std::min(batch, ordered.size() - start);
    std::vector<std::vector<Fragment>> fragments(count);
    parallel_for(count, config.threads,
                 [&](std::size_t k) { fragments[k] = long_format(io::read_vax_csv(ordered[start + k].second)); });
    for (const auto& f : fragments) builder.append(f);
  }
  auto panel = std::move(builder).finish();
  spdlog::info("panel: {} rows over {} years", panel.rows.size(), ordered.size());
  return panel;
}

void write_panel_csv(const PanelDataset& panel, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  out << kPanelHeader << '\n';
  std::string line;
  for (const auto& r : panel.rows) {
    line.clear();
    line += panel.countries[r.o];
    line += ',';
    line += panel.countries[r.d];
    line += ',';
    line += panel.industries[r.i];
    line += ',';
    line += std::to_string(r.t);
    line += ',';
    line += csv::format_significant(r.vax, 12);
    for (const auto* v : {&r.log_vax, &r.log_lk_comp, &r.log_LK_comp, &r.log_lk_phys, &r.log_LK_phys,
                          &r.log_skill_int, &r.log_skill_end}) {
      line += ',';
      line += optional_sig(*v);
    }
    line += ',';
    line += kBroadIndustries[r.broad];
    line += ',';
    line += flags_to_string(r.flags);
    line += '\n';
    out << line;
  }
}

PanelDataset read_panel_csv(const std::filesystem::path& path) {
  csv::Reader reader(path);
  reader.expect_header(kPanelHeader);
  PanelDataset panel;
  std::map<std::string, std::uint16_t, std::less<>> countries, industries;
  auto intern = [](auto& index, std::vector<std::string>& labels, std::string_view code) {
    auto it = index.find(code);
    if (it != index.end()) return it->second;
    const auto id = static_cast<std::uint16_t>(labels.size());
    labels.emplace_back(code);
    index.emplace(std::string(code), id);
    return id;
  };
  std::unordered_set<std::uint64_t> keys;
  while (reader.next()) {
    if (reader.size() != 14) {
      throw ParseError(reader.path(), reader.line_number(), reader.size() + 1, "expected 14 fields");
    }
    PanelRow r;
    r.o = intern(countries, panel.countries, reader.field(0));
    r.d = intern(countries, panel.countries, reader.field(1));
    r.i = intern(industries, panel.industries, reader.field(2));
    r.t = static_cast<int>(reader.integer(3));
    r.vax = reader.number(4);
    r.log_vax = reader.optional_number(5);
    r.log_lk_comp = reader.optional_number(6);
    r.log_LK_comp = reader.optional_number(7);
    r.log_lk_phys = reader.optional_number(8);
    r.log_LK_phys = reader.optional_number(9);
    r.log_skill_int = reader.optional_number(10);
    r.log_skill_end = reader.optional_number(11);
    r.broad = broad_industry_index(reader.field(12));
    r.flags = flags_from_string(reader.field(13));
    const std::uint64_t key =
        ((static_cast<std::uint64_t>(static_cast<std::uint32_t>(r.t)) << 16 | r.o) << 16 | r.d) << 16 | r.i;
    if (!keys.insert(key).second) {
      throw DataError(fmt::format("{}: line {}: duplicate panel key", reader.path(), reader.line_number()));
    }
    if (panel.rows.empty()) {
      panel.first_year = panel.last_year = r.t;
    } else {
      panel.first_year = std::min(panel.first_year, r.t);
      panel.last_year = std::max(panel.last_year, r.t);
    }
    panel.rows.push_back(r);
  }
  return panel;
}

}  // namespace vaxho::panel
