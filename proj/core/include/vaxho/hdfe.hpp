#pragma once

#include "vaxho/config.hpp"
#include "vaxho/panel.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace vaxho::hdfe {

// A fixed-effect dimension is a product of panel keys drawn from {o, d, i, t},
// written "d*i*t" or "o*t".
struct FEDimension {
  std::string name;
  bool o = false;
  bool d = false;
  bool i = false;
  bool t = false;

  static FEDimension parse(const std::string& text);
};

struct FEGroups {
  std::vector<std::vector<std::uint32_t>> ids;  // [dimension][observation]
  std::vector<std::uint32_t> counts;            // groups per dimension

  std::size_t dimensions() const noexcept { return ids.size(); }
  std::size_t observations() const noexcept { return ids.empty() ? 0 : ids.front().size(); }
};

// Dense ids in order of first appearance over `rows`.
FEGroups build_fe_groups(const panel::PanelDataset& panel,
                         const std::vector<std::size_t>& rows,
                         const std::vector<FEDimension>& dims);

// Densifies arbitrary 64-bit keys by first appearance.
std::vector<std::uint32_t> densify(const std::vector<std::uint64_t>& keys, std::uint32_t* count);

// Number of linearly independent dummy columns across all dimensions. For two
// dimensions this is G1 + G2 minus the connected components of the bipartite
// group graph; more dimensions are not supported.
std::size_t absorbed_dummies(const FEGroups& groups);

struct DemeanResult {
  Eigen::MatrixXd values;
  std::size_t iterations = 0;
  bool converged = false;
};

// Alternating projections: subtracts group means dimension by dimension until
// the largest absolute change of a sweep is <= tol. Columns are processed
// independently, so the result does not depend on `threads`.
DemeanResult within_demean(const Eigen::MatrixXd& columns, const FEGroups& groups,
                           double tol = 1e-8, std::size_t max_iter = 500,
                           unsigned threads = 1);

struct OlsResult {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd residuals;
};

// Least squares via Householder QR. Throws NumericalError naming the first
// column that is (numerically) a combination of the preceding ones, using a
// smallest/largest singular value cutoff of `rank_tol`.
OlsResult ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
              const std::vector<std::string>& names = {}, double rank_tol = 1e-10);

enum class VcovFlavor { kHC0, kHC1 };
std::string to_string(VcovFlavor flavor);
VcovFlavor parse_vcov(const std::string& text);

// HC0 = (X'X)^-1 X' diag(e^2) X (X'X)^-1; HC1 scales by n / (n - k - G_absorbed).
Eigen::MatrixXd robust_vcov(const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals,
                            std::size_t n, std::size_t k, std::size_t g_absorbed,
                            VcovFlavor flavor);

enum class Intensity { kCompensation, kPhysical };
std::string to_string(Intensity intensity);

struct RegressionSpec {
  std::string name = "spec";
  std::string dependent = "log_vax";
  // Panel column names or products "a*b". The aliases log_lk and log_LK
  // resolve to the compensation or physical columns per `intensity`.
  std::vector<std::string> regressors = {"log_lk", "log_lk*log_LK"};
  Intensity intensity = Intensity::kCompensation;
  std::vector<std::string> fe = {"d*i*t", "o*t"};
  std::vector<int> years;                 // empty: all
  std::vector<std::string> broad_industries;  // empty: all
  VcovFlavor vcov = VcovFlavor::kHC1;
  double demean_tol = 1e-8;
  std::size_t max_iter = 500;
  double rank_tol = 1e-10;
  // A regressor whose within-group norm falls below this fraction of its
  // centered norm is treated as absorbed by the fixed effects.
  double absorbed_tol = 1e-6;
  unsigned threads = 1;

  // Baseline and skill-extended specifications.
  static RegressionSpec baseline(Intensity intensity);
  static RegressionSpec extended(Intensity intensity);

  std::vector<std::string> resolved_regressors() const;
};

// Reads dependent, regressors, intensity, fe, years, broad_industries, vcov,
// demean_tol, max_iter and name from a key-value spec file.
RegressionSpec parse_spec(const KeyValueConfig& config);

struct RegressionFit {
  std::string spec;
  std::vector<std::string> terms;
  Eigen::VectorXd coefficients;
  Eigen::VectorXd std_errors;
  Eigen::MatrixXd vcov;
  VcovFlavor flavor = VcovFlavor::kHC1;
  std::size_t n_obs = 0;
  std::size_t k_regressors = 0;
  std::size_t g_absorbed = 0;
  std::vector<std::uint32_t> group_counts;
  double r2_full = 0.0;
  double r2_adj_full = 0.0;
  double r2_within = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  // Sample-size ledger: rows before filters, then exclusions by reason.
  std::size_t rows_considered = 0;
  std::vector<std::pair<std::string, std::size_t>> excluded;

  double t_stat(std::size_t j) const { return coefficients[j] / std_errors[j]; }
  // Two-sided p-value against the standard normal.
  double p_value(std::size_t j) const;
};

// Row indices entering the regression: filters first, then availability of
// the dependent variable and every regressor.
std::vector<std::size_t> select_sample(const panel::PanelDataset& panel, const RegressionSpec& spec,
                                       std::vector<std::pair<std::string, std::size_t>>* excluded = nullptr);

// Raw design: column 0 is the dependent variable, then one column per regressor
// (products formed before any demeaning).
Eigen::MatrixXd design_matrix(const panel::PanelDataset& panel, const std::vector<std::size_t>& rows,
                              const RegressionSpec& spec);

RegressionFit estimate(const panel::PanelDataset& panel, const RegressionSpec& spec);

enum class Grouping { kBroadIndustry, kYear };

struct GroupFit {
  std::string group;
  RegressionFit fit;
};

// Independent fits per broad industry section (fixed section order) or per
// year (ascending). Groups below min_obs, or whose regressors are collinear,
// are skipped with a warning; `only`
// restricts to the listed group labels.
std::vector<GroupFit> estimate_by_group(const panel::PanelDataset& panel, const RegressionSpec& spec,
                                        Grouping grouping, std::size_t min_obs = 100,
                                        const std::vector<std::string>& only = {},
                                        unsigned threads = 1);

}  // namespace vaxho::hdfe
