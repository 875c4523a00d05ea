#pragma once

#include "vaxho/iotable.hpp"
#include "vaxho/panel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace vaxho::synth {

// Parameters of a synthetic multi-country economy. Empty vectors are filled
// with deterministic defaults by generate_world.
struct WorldParams {
  std::size_t countries = 5;
  std::size_t industries = 6;
  int first_year = 2000;
  std::size_t years = 2;

  std::vector<double> labor_shares;     // per industry, in (0, 1)
  std::vector<double> log_endowments;   // per country, log L/K target
  double share_noise = 0.15;            // sd of logit labor-share deviations per (o, i, t)

  double intermediate_density = 0.6;    // fraction of domestic suppliers used
  double intermediate_strength = 0.3;   // target column sum of A, <= 0.9
  double final_demand_scale = 1000.0;
  double domestic_share = 1.0;          // domestic absorption relative to exports

  double kappa = 0.3;                   // planted coefficient on log(l/k) x log(L/K)
  double beta1 = -0.3;                  // planted coefficient on log(l/k)
  double noise_sigma = 0.2;             // log-normal disturbance on export flows
  double effect_sigma = 0.5;            // dispersion of importer-industry-year and exporter-year effects

  double wage = 20.0;                   // compensation per hour worked
  double rental = 0.1;                  // capital compensation per unit of stock
  double skill_noise = 0.2;

  std::uint64_t seed = 42;

  // Throws DataError on out-of-range values.
  void validate() const;
};

struct YearWorld {
  io::IOTable table;
  std::vector<panel::SEARecord> sea;
  Eigen::MatrixXd planted_vax;  // the value-added export matrix the table was built to produce
};

struct World {
  WorldParams params;
  std::vector<YearWorld> years;

  std::vector<panel::SEARecord> sea() const;
};

std::vector<std::string> country_codes(std::size_t count);
std::vector<std::string> industry_codes(std::size_t count);

// Fills default labor shares / endowments when unset.
WorldParams complete(WorldParams p);

// Year `index` (0-based) of the world; each year draws from its own stream
// derived from the seed, so years can be generated independently.
YearWorld generate_year(const WorldParams& params, std::size_t index);

World generate_world(const WorldParams& params, unsigned threads = 1);

// Writes wiot_<year>.csv, sea.csv and an identity concordance.csv into `dir`.
void write_world(const World& world, const std::filesystem::path& dir);

// Random nonnegative coefficient matrix with every column sum <= max_column_sum.
Eigen::MatrixXd random_coefficients(std::size_t n, double max_column_sum, double density,
                                    std::uint64_t seed);

// Wraps a coefficient matrix into a TechSystem with nothing pruned.
io::TechSystem tech_system_from(const Eigen::MatrixXd& A);

}  // namespace vaxho::synth
