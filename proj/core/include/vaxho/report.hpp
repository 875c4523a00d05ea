#pragma once

#include "vaxho/hdfe.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace vaxho::report {

// "***" for p < 0.01, "**" for p < 0.05, "*" for p < 0.1.
std::string stars(double p_value);

// term,coef,se,t
void write_fit_csv(const hdfe::RegressionFit& fit, const std::filesystem::path& path);

inline constexpr const char* kSummaryHeader =
    "spec,n,k,G_absorbed,r2_full,r2_adj_full,r2_within,converged";

void write_summary_csv(const std::vector<hdfe::RegressionFit>& fits,
                       const std::filesystem::path& path);

// Reads back a fit written by write_fit_csv plus the summary line named
// `spec`. Only the vcov diagonal survives the round trip.
hdfe::RegressionFit read_fit(const std::string& spec, const std::filesystem::path& fit_csv,
                             const std::filesystem::path& summary_csv);

struct TableColumn {
  std::string label;
  hdfe::RegressionFit fit;
};

// Text table in the layout of a regression results table: coefficient rows
// with stars, standard errors in parentheses beneath, then observations, R2
// and adjusted R2.
std::string format_table(const std::string& title, const std::vector<TableColumn>& columns);

// Display name of a regressor term, e.g. "log(l/k) x log(L/K)".
std::string display_term(const std::string& term);

}  // namespace vaxho::report
