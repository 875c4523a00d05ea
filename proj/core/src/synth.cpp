#include "vaxho/synth.hpp"

#include "vaxho/error.hpp"
#include "vaxho/parallel.hpp"

#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vaxho::synth {

namespace {

using Engine = boost::random::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Independent stream per (seed, purpose, index).
Engine stream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index) {
  return Engine(splitmix64(seed ^ splitmix64(purpose * 0x100000001B3ull + index)));
}

enum Purpose : std::uint64_t { kWorldDefaults = 1, kWorldStructure = 2, kYear = 3, kCoefficients = 4 };

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

template <typename T>
void shuffle(std::vector<T>& values, Engine& rng) {
  for (std::size_t k = values.size(); k > 1; --k) {
    const auto j = static_cast<std::size_t>(rng() % k);
    std::swap(values[k - 1], values[j]);
  }
}

const std::vector<std::string>& wiod_countries() {
  static const std::vector<std::string> codes = {
      "AUS", "AUT", "BEL", "BGR", "BRA", "CAN", "CHE", "CHN", "CYP", "CZE", "DEU", "DNK", "ESP", "EST", "FIN",
      "FRA", "GBR", "GRC", "HRV", "HUN", "IDN", "IND", "IRL", "ITA", "JPN", "KOR", "LTU", "LUX", "LVA", "MEX",
      "MLT", "NLD", "NOR", "POL", "PRT", "ROU", "RUS", "SVK", "SVN", "SWE", "TUR", "TWN", "USA"};
  return codes;
}

struct Structure {
  std::vector<double> tau;           // relative intermediate intensity per industry row
  std::vector<bool> supplier;        // row used as a domestic intermediate supplier
  std::vector<double> skill_industry;
  std::vector<double> skill_country;
};

Structure draw_structure(const WorldParams& p) {
  auto rng = stream(p.seed, kWorldStructure, 0);
  boost::random::uniform_real_distribution<double> tau(0.5, 1.0);
  boost::random::bernoulli_distribution<double> use(p.intermediate_density);
  boost::random::normal_distribution<double> skill_i(0.0, 0.5), skill_c(0.0, 0.3);
  const auto n = p.countries * p.industries;
  Structure s;
  s.tau.resize(n);
  s.supplier.resize(n);
  for (std::size_t k = 0; k < n; ++k) s.tau[k] = tau(rng);
  for (std::size_t k = 0; k < n; ++k) s.supplier[k] = use(rng);
  for (std::size_t c = 0; c < p.countries; ++c) {
    const auto first = c * p.industries;
    bool any = false;
    for (std::size_t i = 0; i < p.industries; ++i) any = any || s.supplier[first + i];
    if (!any) s.supplier[first] = true;
  }
  for (std::size_t i = 0; i < p.industries; ++i) s.skill_industry.push_back(skill_i(rng) - 1.0);
  for (std::size_t c = 0; c < p.countries; ++c) s.skill_country.push_back(skill_c(rng));
  return s;
}

}  // namespace

void WorldParams::validate() const {
  auto fail = [](const std::string& what) { throw DataError("invalid synthetic world parameters: " + what); };
  if (countries < 2) fail("at least 2 countries are required");
  if (countries > 0xFFFF) fail("too many countries");
  if (industries < 1) fail("at least 1 industry is required");
  if (industries > 56) fail("at most 56 industries (the WIOD industry list) are supported");
  if (years < 1) fail("at least 1 year is required");
  if (!labor_shares.empty() && labor_shares.size() != industries) {
    fail(fmt::format("{} labor shares given for {} industries", labor_shares.size(), industries));
  }
  for (std::size_t i = 0; i < labor_shares.size(); ++i) {
    if (!(labor_shares[i] > 0.0 && labor_shares[i] < 1.0)) {
      fail(fmt::format("labor share {} of industry {} must lie strictly between 0 and 1", labor_shares[i], i));
    }
  }
  if (!log_endowments.empty() && log_endowments.size() != countries) {
    fail(fmt::format("{} endowments given for {} countries", log_endowments.size(), countries));
  }
  for (double e : log_endowments) {
    if (!std::isfinite(e)) fail("endowments must be finite");
  }
  if (!(intermediate_density > 0.0 && intermediate_density <= 1.0)) fail("intermediate_density must lie in (0, 1]");
  if (!(intermediate_strength >= 0.0 && intermediate_strength <= 0.9)) {
    fail("intermediate_strength must lie in [0, 0.9]");
  }
  if (!(final_demand_scale > 0.0) || !std::isfinite(final_demand_scale)) fail("final_demand_scale must be positive");
  if (!(domestic_share > 0.0) || !std::isfinite(domestic_share)) fail("domestic_share must be positive");
  if (!std::isfinite(kappa)) fail("kappa must be finite");
  if (!std::isfinite(beta1)) fail("beta1 must be finite");
  if (!(noise_sigma >= 0.0) || !(effect_sigma >= 0.0) || !(share_noise >= 0.0) || !(skill_noise >= 0.0)) {
    fail("noise parameters must be nonnegative");
  }
  if (!(wage > 0.0) || !(rental > 0.0)) fail("wage and rental must be positive");
}

std::vector<std::string> country_codes(std::size_t count) {
  const auto& base = wiod_countries();
  std::vector<std::string> out;
  for (std::size_t c = 0; c < count; ++c) {
    out.push_back(c < base.size() ? base[c] : fmt::format("X{:03d}", c - base.size() + 1));
  }
  return out;
}

std::vector<std::string> industry_codes(std::size_t count) {
  const auto& codes = panel::wiod_industry_codes();
  if (count > codes.size()) throw DataError("at most 56 synthetic industries are supported");
  return {codes.begin(), codes.begin() + static_cast<std::ptrdiff_t>(count)};
}

WorldParams complete(WorldParams p) {
  p.validate();
  auto rng = stream(p.seed, kWorldDefaults, 0);
  if (p.labor_shares.empty()) {
    for (std::size_t i = 0; i < p.industries; ++i) {
      p.labor_shares.push_back(p.industries == 1 ? 0.5 : 0.2 + 0.6 * static_cast<double>(i) / (p.industries - 1));
    }
    shuffle(p.labor_shares, rng);
  }
  if (p.log_endowments.empty()) {
    for (std::size_t c = 0; c < p.countries; ++c) {
      p.log_endowments.push_back(-0.5 + static_cast<double>(c) / (p.countries - 1));
    }
    shuffle(p.log_endowments, rng);
  }
  return p;
}

YearWorld generate_year(const WorldParams& params, std::size_t index) {
  const auto p = complete(params);
  if (index >= p.years) throw DataError(fmt::format("year index {} outside the {} generated years", index, p.years));
  const auto C = p.countries;
  const auto S = p.industries;
  const auto N = C * S;
  const int year = p.first_year + static_cast<int>(index);
  const auto structure = draw_structure(p);
  auto rng = stream(p.seed, kYear, index);
  boost::random::normal_distribution<double> share_noise(0.0, 1.0), effect(0.0, 1.0), noise(0.0, 1.0),
      skill_noise(0.0, 1.0);

  // Labor shares and log intensities per (o, i).
  std::vector<double> share(N), log_lk(N);
  for (std::size_t o = 0; o < C; ++o) {
    for (std::size_t i = 0; i < S; ++i) {
      const double s = logistic(logit(p.labor_shares[i]) + p.share_noise * share_noise(rng));
      share[o * S + i] = s;
      log_lk[o * S + i] = std::log(s / (1.0 - s));
    }
  }
  std::vector<double> importer_industry(C * S), exporter(C);
  for (auto& a : importer_industry) a = p.effect_sigma * effect(rng);
  for (auto& s : exporter) s = p.effect_sigma * effect(rng);

  // Planted value-added exports; the domestic column is filled below.
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(N, C);
  for (std::size_t o = 0; o < C; ++o) {
    for (std::size_t i = 0; i < S; ++i) {
      const auto row = o * S + i;
      const double signal = p.beta1 * log_lk[row] + p.kappa * log_lk[row] * p.log_endowments[o];
      for (std::size_t d = 0; d < C; ++d) {
        if (d == o) continue;
        T(row, d) = p.final_demand_scale *
                    std::exp(importer_industry[d * S + i] + exporter[o] + signal + p.noise_sigma * noise(rng));
      }
    }
  }

  // Domestic absorption: a base proportional to exports, topped up in one
  // industry so the country's labor/capital compensation ratio equals exp(e_o).
  for (std::size_t o = 0; o < C; ++o) {
    double lab = 0.0, cap = 0.0;
    for (std::size_t i = 0; i < S; ++i) {
      const auto row = o * S + i;
      const double exports = T.row(row).sum();
      T(row, o) = p.domestic_share * exports;
      const double va = exports + T(row, o);
      lab += share[row] * va;
      cap += (1.0 - share[row]) * va;
    }
    if (S < 2) continue;
    const double target = std::exp(p.log_endowments[o]);
    const bool raise = lab / cap < target;
    std::size_t pick = o * S;
    for (std::size_t i = 0; i < S; ++i) {
      const auto row = o * S + i;
      if (raise ? log_lk[row] > log_lk[pick] : log_lk[row] < log_lk[pick]) pick = row;
    }
    const double s = share[pick];
    if (raise ? s / (1.0 - s) <= target : s / (1.0 - s) >= target) {
      throw DataError(fmt::format(
          "synthetic country {} in {}: endowment {:.4g} lies outside the range of its industry intensities; "
          "reduce share_noise or the endowment spread",
          o, year, target));
    }
    T(pick, o) += (target * cap - lab) / (s - target * (1.0 - s));
  }

  // Domestic rank-one intermediate blocks A(j, n) = pi_j * theta_n. The
  // supplier weights pi are bounded so that F = (I - A) diag(v)^-1 T >= 0.
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(N);
  Eigen::VectorXd pi = Eigen::VectorXd::Zero(N);
  Eigen::MatrixXd U(N, C);
  for (std::size_t o = 0; o < C; ++o) {
    double scale = 1.0;
    for (int attempt = 0;; ++attempt) {
      for (std::size_t i = 0; i < S; ++i) {
        const auto row = o * S + i;
        theta[row] = p.intermediate_strength * structure.tau[row] * scale;
        U.row(row) = T.row(row) / (1.0 - theta[row]);
      }
      if (p.intermediate_strength == 0.0) break;
      Eigen::RowVectorXd weighted = Eigen::RowVectorXd::Zero(C);
      for (std::size_t i = 0; i < S; ++i) weighted += theta[o * S + i] * U.row(o * S + i);
      double total = 0.0;
      for (std::size_t i = 0; i < S; ++i) {
        const auto row = o * S + i;
        pi[row] = structure.supplier[row] ? (U.row(row).array() / weighted.array()).minCoeff() : 0.0;
        total += pi[row];
      }
      if (total >= 1.0 / 0.98) {
        for (std::size_t i = 0; i < S; ++i) pi[o * S + i] /= total;
        break;
      }
      if (attempt > 400) throw DataError("cannot construct nonnegative final demand for the synthetic world");
      scale *= 0.8;
    }
  }

  YearWorld out;
  auto& t = out.table;
  t.year = year;
  t.countries = country_codes(C);
  t.industries = industry_codes(S);
  t.x = U.rowwise().sum();
  t.Z = Eigen::MatrixXd::Zero(N, N);
  t.F = U;
  for (std::size_t o = 0; o < C; ++o) {
    Eigen::RowVectorXd weighted = Eigen::RowVectorXd::Zero(C);
    for (std::size_t i = 0; i < S; ++i) weighted += theta[o * S + i] * U.row(o * S + i);
    for (std::size_t j = 0; j < S; ++j) {
      const auto row = o * S + j;
      t.F.row(row) -= pi[row] * weighted;
      for (std::size_t n = 0; n < S; ++n) {
        const auto col = o * S + n;
        t.Z(row, col) = pi[row] * theta[col] * t.x[col];
      }
    }
  }
  t.F = t.F.cwiseMax(0.0);  // clears -0 and rounding-level negatives
  out.planted_vax = T;

  const Eigen::VectorXd va = T.rowwise().sum();
  for (std::size_t o = 0; o < C; ++o) {
    for (std::size_t i = 0; i < S; ++i) {
      const auto row = o * S + i;
      panel::SEARecord r;
      r.country = t.countries[o];
      r.industry = t.industries[i];
      r.year = year;
      r.value_added = va[row];
      r.labor_compensation = share[row] * va[row];
      r.capital_compensation = (1.0 - share[row]) * va[row];
      r.hours_worked = *r.labor_compensation / p.wage;
      r.capital_stock = *r.capital_compensation / p.rental;
      const double ratio = std::exp(structure.skill_industry[i] + structure.skill_country[o] +
                                    p.skill_noise * skill_noise(rng));
      const double high = *r.hours_worked * ratio / (1.0 + ratio);
      const double unskilled = *r.hours_worked - high;
      r.hours_high_skill = high;
      r.hours_medium_skill = 0.6 * unskilled;
      r.hours_low_skill = unskilled - 0.6 * unskilled;
      out.sea.push_back(std::move(r));
    }
  }
  return out;
}

World generate_world(const WorldParams& params, unsigned threads) {
  World world;
  world.params = complete(params);
  world.years.resize(world.params.years);
  parallel_for(world.params.years, threads, [&](std::size_t k) { world.years[k] = generate_year(world.params, k); });
  return world;
}

std::vector<panel::SEARecord> World::sea() const {
  std::vector<panel::SEARecord> out;
  for (const auto& y : years) out.insert(out.end(), y.sea.begin(), y.sea.end());
  return out;
}

void write_world(const World& world, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& y : world.years) io::write_wiot(y.table, dir / fmt::format("wiot_{}.csv", y.table.year));
  panel::write_sea(world.sea(), dir / "sea.csv");
  std::vector<panel::ConcordanceEntry> identity;
  if (!world.years.empty()) {
    for (const auto& code : world.years.front().table.industries) identity.push_back({code, code, 1.0});
  }
  panel::write_concordance(identity, dir / "concordance.csv");
}

Eigen::MatrixXd random_coefficients(std::size_t n, double max_column_sum, double density, std::uint64_t seed) {
  if (!(max_column_sum >= 0.0 && max_column_sum < 1.0)) throw DataError("max_column_sum must lie in [0, 1)");
  auto rng = stream(seed, kCoefficients, n);
  boost::random::uniform_real_distribution<double> unit(0.0, 1.0), fill(0.5, 1.0);
  boost::random::bernoulli_distribution<double> use(density);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      if (use(rng)) A(i, j) = unit(rng);
    }
    const double sum = A.col(j).sum();
    const double target = max_column_sum * fill(rng);
    if (sum > 0.0) A.col(j) *= target / sum;
  }
  return A;
}

io::TechSystem tech_system_from(const Eigen::MatrixXd& A) {
  io::TechSystem sys;
  sys.A = A;
  sys.v = (Eigen::VectorXd::Ones(A.cols()) - A.colwise().sum().transpose()).cwiseMax(0.0);
  sys.keep_mask.assign(static_cast<std::size_t>(A.rows()), true);
  return sys;
}

}  // namespace vaxho::synth
