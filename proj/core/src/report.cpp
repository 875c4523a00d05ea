#include "vaxho/report.hpp"

#include "vaxho/csv.hpp"
#include "vaxho/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace vaxho::report {

namespace {

std::string thousands(std::size_t n) {
  auto digits = std::to_string(n);
  for (int pos = static_cast<int>(digits.size()) - 3; pos > 0; pos -= 3) digits.insert(pos, ",");
  return digits;
}

std::string decimal(double value) {
  if (value != 0.0 && std::abs(value) < 0.001) return fmt::format("{:.1g}", value);
  return fmt::format("{:.3f}", value);
}

std::string pad(const std::string& s, std::size_t width, bool left = false) {
  if (s.size() >= width) return s;
  return left ? s + std::string(width - s.size(), ' ') : std::string(width - s.size(), ' ') + s;
}

}  // namespace

std::string stars(double p) {
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.1) return "*";
  return "";
}

std::string display_term(const std::string& term) {
  std::string out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = term.find('*', start);
    const auto factor = term.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
    std::string name = factor;
    if (factor.rfind("log_lk", 0) == 0) name = "log(l/k)";
    else if (factor.rfind("log_LK", 0) == 0) name = "log(L/K)";
    else if (factor == "log_skill_int") name = "log(l_hs/l_us)";
    else if (factor == "log_skill_end") name = "log(L_hs/L_us)";
    if (!out.empty()) out += " x ";
    out += name;
    if (pos == std::string::npos) return out;
    start = pos + 1;
  }
}

void write_fit_csv(const hdfe::RegressionFit& fit, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  out << "term,coef,se,t\n";
  for (std::size_t j = 0; j < fit.terms.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    out << fit.terms[j] << ',' << csv::format_exact(fit.coefficients[jj]) << ','
        << csv::format_exact(fit.std_errors[jj]) << ',' << csv::format_exact(fit.t_stat(j)) << '\n';
  }
}

void write_summary_csv(const std::vector<hdfe::RegressionFit>& fits, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  out << kSummaryHeader << '\n';
  for (const auto& fit : fits) {
    out << fit.spec << ',' << fit.n_obs << ',' << fit.k_regressors << ',' << fit.g_absorbed << ','
        << csv::format_exact(fit.r2_full) << ',' << csv::format_exact(fit.r2_adj_full) << ','
        << csv::format_exact(fit.r2_within) << ',' << (fit.converged ? "true" : "false") << '\n';
  }
}

hdfe::RegressionFit read_fit(const std::string& spec, const std::filesystem::path& fit_csv,
                             const std::filesystem::path& summary_csv) {
  hdfe::RegressionFit fit;
  fit.spec = spec;
  {
    csv::Reader reader(fit_csv);
    reader.expect_header("term,coef,se,t");
    std::vector<double> coef, se;
    while (reader.next()) {
      fit.terms.emplace_back(reader.field(0));
      coef.push_back(reader.number(1));
      se.push_back(reader.number(2));
    }
    fit.coefficients = Eigen::Map<Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
    fit.std_errors = Eigen::Map<Eigen::VectorXd>(se.data(), static_cast<Eigen::Index>(se.size()));
    fit.vcov = fit.std_errors.array().square().matrix().asDiagonal();
    fit.k_regressors = fit.terms.size();
  }
  csv::Reader reader(summary_csv);
  reader.expect_header(kSummaryHeader);
  while (reader.next()) {
    if (reader.field(0) != spec) continue;
    fit.n_obs = static_cast<std::size_t>(reader.integer(1));
    fit.g_absorbed = static_cast<std::size_t>(reader.integer(3));
    fit.r2_full = reader.number(4);
    fit.r2_adj_full = reader.number(5);
    fit.r2_within = reader.number(6);
    fit.converged = reader.field(7) == "true";
    return fit;
  }
  throw DataError(fmt::format("{}: no summary line for spec '{}'", summary_csv.string(), spec));
}

std::string format_table(const std::string& title, const std::vector<TableColumn>& columns) {
  std::vector<std::string> terms;
  for (const auto& col : columns) {
    for (const auto& t : col.fit.terms) {
      if (std::find(terms.begin(), terms.end(), t) == terms.end()) terms.push_back(t);
    }
  }
  // Terms of different intensity definitions share a display row.
  std::vector<std::string> rows;
  std::vector<std::vector<std::string>> members;
  for (const auto& t : terms) {
    const auto name = display_term(t);
    auto it = std::find(rows.begin(), rows.end(), name);
    if (it == rows.end()) {
      rows.push_back(name);
      members.push_back({t});
    } else {
      members[static_cast<std::size_t>(it - rows.begin())].push_back(t);
    }
  }

  // Body lines as (label, cells); an empty cell list marks a thin rule.
  std::vector<std::pair<std::string, std::vector<std::string>>> body;
  {
    std::vector<std::string> header;
    for (const auto& c : columns) header.push_back(c.label);
    body.emplace_back("", header);
    body.emplace_back("", std::vector<std::string>{});
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::vector<std::string> coef_cells, se_cells;
    for (const auto& col : columns) {
      std::string coef, se;
      for (std::size_t j = 0; j < col.fit.terms.size(); ++j) {
        if (std::find(members[r].begin(), members[r].end(), col.fit.terms[j]) == members[r].end()) continue;
        const auto jj = static_cast<Eigen::Index>(j);
        coef = decimal(col.fit.coefficients[jj]) + stars(col.fit.p_value(j));
        se = "(" + decimal(col.fit.std_errors[jj]) + ")";
      }
      coef_cells.push_back(coef);
      se_cells.push_back(se);
    }
    body.emplace_back(rows[r], coef_cells);
    body.emplace_back("", se_cells);
  }
  body.emplace_back("", std::vector<std::string>{});
  std::vector<std::string> n_cells, r2_cells, adj_cells;
  for (const auto& col : columns) {
    n_cells.push_back(thousands(col.fit.n_obs));
    r2_cells.push_back(fmt::format("{:.3f}", col.fit.r2_full));
    adj_cells.push_back(fmt::format("{:.3f}", col.fit.r2_adj_full));
  }
  body.emplace_back("Observations", n_cells);
  body.emplace_back("R2", r2_cells);
  body.emplace_back("Adjusted R2", adj_cells);

  std::size_t label_width = 0, col_width = 12;
  for (const auto& [label, cells] : body) {
    label_width = std::max(label_width, label.size());
    for (const auto& c : cells) col_width = std::max(col_width, c.size() + 2);
  }
  const std::size_t width = label_width + col_width * columns.size();
  std::string out = title + "\n" + std::string(width, '=') + "\n";
  for (const auto& [label, cells] : body) {
    if (cells.empty()) {
      out += std::string(width, '-') + "\n";
      continue;
    }
    out += pad(label, label_width, true);
    for (const auto& c : cells) out += pad(c, col_width);
    out += "\n";
  }
  out += std::string(width, '=') + "\n";
  out += "Note: heteroskedasticity-robust standard errors in parentheses. *p<0.1; **p<0.05; ***p<0.01\n";
  return out;
}

}  // namespace vaxho::report
