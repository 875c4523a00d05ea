#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace vaxho::io {

// Row/column index of (country c, industry s) is c * S + s throughout.
struct IOTable {
  int year = 0;
  std::vector<std::string> countries;
  std::vector<std::string> industries;
  Eigen::MatrixXd Z;  // N x N intermediate flows, Z(i, j): i supplies j
  Eigen::MatrixXd F;  // N x C final demand, aggregated per destination country
  Eigen::VectorXd x;  // gross output

  std::size_t country_count() const noexcept { return countries.size(); }
  std::size_t industry_count() const noexcept { return industries.size(); }
  std::size_t size() const noexcept { return countries.size() * industries.size(); }
  std::size_t index(std::size_t country, std::size_t industry) const noexcept {
    return country * industries.size() + industry;
  }
  std::string label(std::size_t i) const;
};

struct Tolerances {
  double balance_tol = 1e-3;
  double coeff_tol = 1e-6;
  double solve_tol = 1e-10;
  double pivot_floor = 1e-12;
  double output_floor = 1e-9;
  double identity_tol = 1e-9;
};

struct BalanceViolation {
  std::size_t index = 0;
  double residual = 0.0;  // x_i - (row sum of Z + row sum of F)
  double relative = 0.0;  // |residual| / max(1, x_i)
};

// Checks dimensions, finiteness and nonnegativity of Z. Throws DataError.
void validate(const IOTable& t);

// Every row whose relative balance residual exceeds balance_tol.
std::vector<BalanceViolation> row_balance_violations(const IOTable& t, double balance_tol);

// Reads the long CSV layout
//   origin_country,origin_industry,kind,dest_country,dest_key,value
// with kind in {Z, F, X}. Final-demand categories are summed per destination
// country. Countries and industries are ordered by first appearance.
IOTable load_wiot(const std::filesystem::path& path, int year,
                  const Tolerances& tol = {});

// Writes the same layout; zero Z/F cells are omitted. Values are written in
// shortest round-trip form, so load_wiot(write_wiot(t)) reproduces t exactly
// apart from F categories (a single category "FD" per destination is written).
void write_wiot(const IOTable& t, const std::filesystem::path& path);

enum class PruneReason { kZeroOutput, kNoFlows };

struct PrunedIndustry {
  std::size_t index = 0;
  std::string country;
  std::string industry;
  PruneReason reason = PruneReason::kZeroOutput;
};

std::string to_string(PruneReason reason);

struct TechSystem {
  Eigen::MatrixXd A;          // technical coefficients, zero on pruned rows/cols
  Eigen::VectorXd v;          // value-added shares, zero for pruned industries
  std::vector<bool> keep_mask;
  std::vector<PrunedIndustry> prune_report;
  std::size_t clamped_shares = 0;  // small negative v_i set to zero

  std::size_t size() const noexcept { return keep_mask.size(); }
  std::vector<std::size_t> retained() const;
};

// A(i, j) = Z(i, j) / x_j over retained industries, v_j = 1 - sum_i A(i, j).
// An industry is pruned when x_j <= output_floor, or when its Z row, Z column
// and F row are all zero. Throws DataError when a retained column of A sums
// above 1 + coeff_tol.
TechSystem build_tech_system(const IOTable& t, const Tolerances& tol = {});

// LU factorization of (I - A) restricted to the retained industries. Solves
// against any number of right-hand sides without forming the inverse.
class LeontiefSolver {
 public:
  explicit LeontiefSolver(const TechSystem& sys, const Tolerances& tol = {});

  // Returns M with (I - A) M = B on the retained subsystem; pruned rows of M
  // are zero and pruned rows of B are ignored. Throws NumericalError when the
  // residual check fails.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& B) const;

  std::size_t retained_size() const noexcept { return retained_.size(); }

 private:
  const TechSystem* sys_;
  Tolerances tol_;
  std::vector<std::size_t> retained_;
  Eigen::MatrixXd system_;  // I - A on the retained block
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

Eigen::MatrixXd leontief_solve(const TechSystem& sys, const Eigen::MatrixXd& B,
                               const Tolerances& tol = {});

struct VAXMatrix {
  int year = 0;
  std::vector<std::string> countries;   // destinations, and origin countries
  std::vector<std::string> industries;
  Eigen::MatrixXd values;               // N x C

  std::size_t size() const noexcept { return countries.size() * industries.size(); }
};

// values = diag(v) (I - A)^{-1} F.
VAXMatrix compute_vax(const TechSystem& sys, const IOTable& t, const Tolerances& tol = {});

// year,origin_country,origin_industry,dest_country,vax
void write_vax_csv(const VAXMatrix& vx, const std::filesystem::path& path);
VAXMatrix read_vax_csv(const std::filesystem::path& path);

struct AccountingReport {
  int year = 0;
  std::vector<double> gdp_residual;       // per destination column, absolute
  std::vector<double> gdp_relative;       // relative to the column sum of F
  std::vector<BalanceViolation> balance;  // rows breaching balance_tol
  double max_balance_relative = 0.0;
  std::size_t pruned = 0;
  std::size_t clamped_shares = 0;
  double v_min = 0.0;
  double v_max = 0.0;
  std::vector<std::string> flags;

  bool gdp_ok() const;
  bool balance_ok() const noexcept { return balance.empty(); }
  bool ok() const noexcept { return flags.empty(); }
};

AccountingReport accounting_report(const IOTable& t, const TechSystem& sys,
                                   const VAXMatrix& vx, const Tolerances& tol = {});

std::string format_report(const AccountingReport& report, const IOTable& t);

}  // namespace vaxho::io
