#pragma once

#include "vaxho/iotable.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_set>
#include <vector>

namespace vaxho::panel {

struct SEARecord {
  std::string country;
  std::string industry;
  int year = 0;
  std::optional<double> labor_compensation;
  std::optional<double> capital_compensation;  // va - lab_comp when not given
  std::optional<double> value_added;
  std::optional<double> hours_worked;
  std::optional<double> capital_stock;
  std::optional<double> hours_high_skill;
  std::optional<double> hours_medium_skill;
  std::optional<double> hours_low_skill;
  bool capital_compensation_derived = false;

  bool has_skill() const noexcept { return hours_high_skill.has_value(); }
};

// country,industry,year,lab_comp,cap_comp,va,hours,cap_stock,h_hs,h_ms,h_ls
std::vector<SEARecord> load_sea(const std::filesystem::path& path);
void write_sea(const std::vector<SEARecord>& records, const std::filesystem::path& path);

struct ConcordanceEntry {
  std::string source_industry;
  std::string target_industry;
  double weight = 1.0;
};

// Maps skill hours from an older industry classification onto the panel's.
// An empty concordance is the identity mapping.
class Concordance {
 public:
  Concordance() = default;
  // Throws DataError unless weights per source sum to 1 within 1e-6.
  explicit Concordance(std::vector<ConcordanceEntry> entries);

  static Concordance load(const std::filesystem::path& path);
  static Concordance identity() { return {}; }

  bool is_identity() const noexcept { return by_source_.empty(); }
  // Target industries and weights for one source; identity when pass-through.
  std::vector<std::pair<std::string, double>> targets(const std::string& source) const;
  const std::vector<ConcordanceEntry>& entries() const noexcept { return entries_; }

 private:
  std::vector<ConcordanceEntry> entries_;
  std::map<std::string, std::vector<std::pair<std::string, double>>> by_source_;
};

// source_industry,target_industry,weight
void write_concordance(const std::vector<ConcordanceEntry>& entries,
                       const std::filesystem::path& path);

// ISIC Rev. 4 section grouping used for the per-industry sweep.
inline constexpr std::array<std::string_view, 13> kBroadIndustries = {
    "A", "B", "C", "D+E", "F", "G", "H", "I", "J", "K", "L", "M", "other"};

// The 56 industry codes of the 2016 world input-output tables.
const std::vector<std::string>& wiod_industry_codes();

// "C10-C12" -> "C", "D35"/"E36" -> "D+E", sections N..U -> "other".
// Throws DataError for codes outside the WIOD list.
std::string assign_broad_industry(std::string_view industry_code);

// Index into kBroadIndustries.
std::uint8_t broad_industry_index(std::string_view label);

using CountryIndustryYear = std::tuple<std::string, std::string, int>;
using CountryYear = std::pair<std::string, int>;

struct IndustryRatios {
  std::optional<double> lk_comp;  // labor / capital compensation
  std::optional<double> lk_phys;  // hours worked / nominal capital stock
};

struct CountryRatios {
  std::optional<double> LK_comp;
  std::optional<double> LK_phys;
};

struct RatioLedger {
  std::size_t comp_invalid = 0;  // industries with missing or nonpositive compensation
  std::size_t phys_invalid = 0;  // industries with missing or nonpositive hours/stock
  std::size_t negative_inputs = 0;
  std::size_t countries_without_comp = 0;
  std::size_t countries_without_phys = 0;
};

struct RatioTables {
  std::map<CountryIndustryYear, IndustryRatios> industry;
  std::map<CountryYear, CountryRatios> country;
  RatioLedger ledger;
};

// Industry ratios are formed only from strictly positive, finite inputs.
// Country endowments sum the same inputs over all valid industries of the
// country-year. A year of 0 processes every year present.
RatioTables intensities_and_endowments(const std::vector<SEARecord>& sea, int year = 0);

struct SkillTables {
  std::map<CountryIndustryYear, double> industry;  // l_hs / (l_ms + l_ls)
  std::map<CountryYear, double> country;
  // Hours per (country, year, class) after mapping: class 0 high, 1 medium, 2 low.
  std::map<std::tuple<std::string, int, int>, double> totals;
  std::size_t missing = 0;
};

// Allocates skill hours through the concordance and forms the high / unskilled
// ratios. Throws DataError when a record with skill hours has an industry the
// concordance does not map.
SkillTables skill_ratios(const std::vector<SEARecord>& sea, const Concordance& concordance);

// Row-level provenance; a row may carry several flags.
enum Flag : std::uint32_t {
  kNonPositiveVax = 1u << 0,
  kNoSea = 1u << 1,
  kNegativeInput = 1u << 2,
  kNoCompIntensity = 1u << 3,
  kNoCompEndowment = 1u << 4,
  kNoPhysIntensity = 1u << 5,
  kNoPhysEndowment = 1u << 6,
  kNoSkillIntensity = 1u << 7,
  kNoSkillEndowment = 1u << 8,
};

std::string flags_to_string(std::uint32_t flags);
std::uint32_t flags_from_string(std::string_view text);

struct PanelRow {
  std::uint16_t o = 0;  // indices into PanelDataset::countries
  std::uint16_t d = 0;
  std::uint16_t i = 0;  // index into PanelDataset::industries
  int t = 0;
  double vax = 0.0;
  std::optional<double> log_vax;
  std::optional<double> log_lk_comp;
  std::optional<double> log_LK_comp;
  std::optional<double> log_lk_phys;
  std::optional<double> log_LK_phys;
  std::optional<double> log_skill_int;
  std::optional<double> log_skill_end;
  std::uint8_t broad = 0;  // index into kBroadIndustries
  std::uint32_t flags = 0;
};

// The estimation samples a panel row can belong to.
enum class Sample { kCompensation, kPhysical, kCompensationSkill, kPhysicalSkill };
inline constexpr std::array<Sample, 4> kSamples = {
    Sample::kCompensation, Sample::kPhysical, Sample::kCompensationSkill,
    Sample::kPhysicalSkill};
std::string to_string(Sample sample);

// Per-sample exclusion counts. Each excluded row is charged to the first
// failing rule in a fixed order, so raw == retained + sum(dropped).
struct SampleLedger {
  std::size_t raw = 0;
  std::size_t retained = 0;
  std::vector<std::pair<std::string, std::size_t>> dropped;

  std::size_t dropped_total() const;
};

struct PanelDataset {
  std::vector<std::string> countries;
  std::vector<std::string> industries;
  std::vector<PanelRow> rows;
  int first_year = 0;
  int last_year = 0;

  const std::string& origin(const PanelRow& r) const { return countries[r.o]; }
  const std::string& destination(const PanelRow& r) const { return countries[r.d]; }
  const std::string& industry(const PanelRow& r) const { return industries[r.i]; }

  SampleLedger ledger(Sample sample) const;
  std::string format_ledger() const;
};

bool in_sample(const PanelRow& row, Sample sample);

// One unjoined panel row per (origin industry, foreign destination); the
// domestic column is dropped. vax <= 0 keeps the row with kNonPositiveVax.
struct Fragment {
  std::string origin_country;
  std::string industry;
  std::string destination;
  int year = 0;
  double vax = 0.0;
};

std::vector<Fragment> long_format(const io::VAXMatrix& vx);

// Attaches origin-side ratios. Missing SEA coverage is flagged, never imputed.
// Throws DataError on duplicate SEA keys.
PanelDataset join_sea(const std::vector<Fragment>& fragments,
                      const std::vector<SEARecord>& sea,
                      const Concordance& concordance = {});

// Incremental form of join_sea: appends fragments year by year so a long
// panel never needs every year's fragments in memory at once.
class PanelBuilder {
 public:
  PanelBuilder(const std::vector<SEARecord>& sea, const Concordance& concordance = {});

  // Throws DataError on duplicate (o, d, i, t) keys.
  void append(const std::vector<Fragment>& fragments);
  PanelDataset finish() &&;

 private:
  std::uint16_t country_id(const std::string& code);
  std::uint16_t industry_id(const std::string& code);

  RatioTables ratios_;
  SkillTables skills_;
  std::map<CountryIndustryYear, bool> sea_negative_;  // key present: SEA record exists
  PanelDataset panel_;
  std::map<std::string, std::uint16_t> country_ids_;
  std::map<std::string, std::uint16_t> industry_ids_;
  std::vector<std::uint8_t> industry_broad_;
  std::unordered_set<std::uint64_t> keys_;
};

struct PanelConfig {
  unsigned threads = 1;
};

// Reads every VX file, reshapes and joins. Rows are ordered by year, then
// origin row order of the VX file, then destination order.
PanelDataset build_panel(const std::vector<std::filesystem::path>& vax_files,
                         const std::filesystem::path& sea_file,
                         const std::optional<std::filesystem::path>& concordance_file,
                         const PanelConfig& config = {});

// o,d,i,t,vax,log_vax,log_lk_comp,log_LK_comp,log_lk_phys,log_LK_phys,
// log_skill_int,log_skill_end,broad_industry,flags  (12 significant digits)
inline constexpr std::string_view kPanelHeader =
    "o,d,i,t,vax,log_vax,log_lk_comp,log_LK_comp,log_lk_phys,log_LK_phys,"
    "log_skill_int,log_skill_end,broad_industry,flags";

void write_panel_csv(const PanelDataset& panel, const std::filesystem::path& path);
PanelDataset read_panel_csv(const std::filesystem::path& path);

}  // namespace vaxho::panel
