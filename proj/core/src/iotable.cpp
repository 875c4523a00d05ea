#include "vaxho/iotable.hpp"

#include "vaxho/csv.hpp"
#include "vaxho/error.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <unordered_map>
#include <unordered_set>

namespace vaxho::io {

namespace {

constexpr std::string_view kWiotHeader = "origin_country,origin_industry,kind,dest_country,dest_key,value";
constexpr std::string_view kVaxHeader = "year,origin_country,origin_industry,dest_country,vax";

// Interns labels in order of first appearance.
class LabelIndex {
 public:
  std::size_t intern(std::string_view label) {
    auto it = index_.find(std::string(label));
    if (it != index_.end()) return it->second;
    const auto id = labels_.size();
    labels_.emplace_back(label);
    index_.emplace(labels_.back(), id);
    return id;
  }
  std::optional<std::size_t> find(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return labels_.size(); }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct RawCell {
  char kind;
  std::uint32_t origin_country;
  std::uint32_t origin_industry;
  std::uint32_t dest_country;
  std::uint32_t dest_key;  // industry id for Z, category id for F
  double value;
  std::size_t line;
};

}  // namespace

std::string IOTable::label(std::size_t i) const {
  const auto s = industries.size();
  return countries.at(i / s) + "/" + industries.at(i % s);
}

void validate(const IOTable& t) {
  const auto n = static_cast<Eigen::Index>(t.size());
  const auto c = static_cast<Eigen::Index>(t.country_count());
  if (t.countries.empty() || t.industries.empty()) throw DataError("IO table has no labels");
  if (t.Z.rows() != n || t.Z.cols() != n || t.F.rows() != n || t.F.cols() != c || t.x.size() != n) {
    throw DataError(fmt::format(
        "IO table dimensions disagree with labels: expected N={} C={}, got Z {}x{}, F {}x{}, x {}",
        n, c, t.Z.rows(), t.Z.cols(), t.F.rows(), t.F.cols(), t.x.size()));
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (!std::isfinite(t.x[j])) throw DataError(fmt::format("x[{}] is not finite", t.label(j)));
    for (Eigen::Index i = 0; i < n; ++i) {
      const double z = t.Z(i, j);
      if (!std::isfinite(z) || z < 0.0) {
        throw DataError(fmt::format("Z({}, {}) = {} is not a finite nonnegative flow", t.label(i),
                                    t.label(j), z));
      }
    }
  }
  for (Eigen::Index d = 0; d < c; ++d) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!std::isfinite(t.F(i, d))) {
        throw DataError(fmt::format("F({}, {}) is not finite", t.label(i), t.countries[d]));
      }
    }
  }
}

std::vector<BalanceViolation> row_balance_violations(const IOTable& t, double balance_tol) {
  std::vector<BalanceViolation> out;
  const Eigen::VectorXd uses = t.Z.rowwise().sum() + t.F.rowwise().sum();
  for (Eigen::Index i = 0; i < t.x.size(); ++i) {
    const double residual = t.x[i] - uses[i];
    const double relative = std::abs(residual) / std::max(1.0, std::abs(t.x[i]));
    if (relative > balance_tol) out.push_back({static_cast<std::size_t>(i), residual, relative});
  }
  return out;
}

IOTable load_wiot(const std::filesystem::path& path, int year, const Tolerances& tol) {
  csv::Reader reader(path);
  reader.expect_header(kWiotHeader);

  LabelIndex countries, industries, categories;
  std::vector<RawCell> cells;
  while (reader.next()) {
    if (reader.size() != 6) {
      throw ParseError(reader.path(), reader.line_number(), std::min<std::size_t>(reader.size(), 6) + 1,
                       fmt::format("expected 6 fields, found {}", reader.size()));
    }
    const auto kind_text = reader.field(2);
    if (kind_text != "Z" && kind_text != "F" && kind_text != "X") {
      throw ParseError(reader.path(), reader.line_number(), 3,
                       fmt::format("unknown kind '{}' (expected Z, F or X)", kind_text));
    }
    const auto oc = reader.field(0);
    const auto oi = reader.field(1);
    if (oc.empty() || oi.empty()) {
      throw ParseError(reader.path(), reader.line_number(), oc.empty() ? 1 : 2, "empty origin label");
    }
    RawCell cell{};
    cell.kind = kind_text.front();
    cell.origin_country = static_cast<std::uint32_t>(countries.intern(oc));
    cell.origin_industry = static_cast<std::uint32_t>(industries.intern(oi));
    cell.value = reader.number(5);
    cell.line = reader.line_number();
    if (cell.kind == 'X') {
      if (!reader.field(4).empty()) {
        throw ParseError(reader.path(), reader.line_number(), 5, "X rows must leave dest_key empty");
      }
    } else {
      const auto dc = reader.field(3);
      const auto dk = reader.field(4);
      if (dc.empty() || dk.empty()) {
        throw ParseError(reader.path(), reader.line_number(), dc.empty() ? 4 : 5,
                         "empty destination label");
      }
      cell.dest_country = static_cast<std::uint32_t>(countries.intern(dc));
      cell.dest_key = static_cast<std::uint32_t>(cell.kind == 'Z' ? industries.intern(dk)
                                                                  : categories.intern(dk));
    }
    cells.push_back(cell);
  }

  IOTable t;
  t.year = year;
  t.countries = countries.labels();
  t.industries = industries.labels();
  const auto c = t.country_count();
  const auto s = t.industry_count();
  const auto n = c * s;
  if (n == 0) throw DataError(fmt::format("{}: no table rows", reader.path()));

  t.Z = Eigen::MatrixXd::Zero(n, n);
  t.F = Eigen::MatrixXd::Zero(n, c);
  t.x = Eigen::VectorXd::Zero(n);
  std::vector<bool> seen_z(n * n, false);
  std::vector<bool> seen_x(n, false);
  std::unordered_set<std::uint64_t> seen_f;

  for (const auto& cell : cells) {
    const auto row = cell.origin_country * s + cell.origin_industry;
    const auto origin_label = t.countries[cell.origin_country] + "/" + t.industries[cell.origin_industry];
    switch (cell.kind) {
      case 'X':
        if (seen_x[row]) {
          throw DataError(fmt::format("{}: line {}: duplicate X row for '{}'", reader.path(), cell.line,
                                      origin_label));
        }
        seen_x[row] = true;
        t.x[row] = cell.value;
        break;
      case 'Z': {
        const auto col = cell.dest_country * s + cell.dest_key;
        if (seen_z[row * n + col]) {
          throw DataError(fmt::format("{}: line {}: duplicate Z entry '{}' -> '{}'", reader.path(),
                                      cell.line, origin_label, t.label(col)));
        }
        seen_z[row * n + col] = true;
        t.Z(row, col) = cell.value;
        break;
      }
      case 'F': {
        const std::uint64_t key =
            (static_cast<std::uint64_t>(row) * c + cell.dest_country) * categories.size() + cell.dest_key;
        if (!seen_f.insert(key).second) {
          throw DataError(fmt::format("{}: line {}: duplicate F entry '{}' -> '{}/{}'", reader.path(),
                                      cell.line, origin_label, t.countries[cell.dest_country],
                                      categories.labels()[cell.dest_key]));
        }
        t.F(row, cell.dest_country) += cell.value;
        break;
      }
      default:
        break;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!seen_x[i]) {
      throw DataError(fmt::format("{}: missing X row for '{}' (every country must list all {} industries)",
                                  reader.path(), t.label(i), s));
    }
  }
  validate(t);

  const auto violations = row_balance_violations(t, tol.balance_tol);
  if (!violations.empty()) {
    const auto worst = std::max_element(violations.begin(), violations.end(),
                                        [](const auto& a, const auto& b) { return a.relative < b.relative; });
    spdlog::warn("{}: {} rows breach the row-balance tolerance {}; worst '{}' relative residual {:.3g}",
                 reader.path(), violations.size(), tol.balance_tol, t.label(worst->index), worst->relative);
  }
  for (Eigen::Index i = 0; i < t.F.rows(); ++i) {
    for (Eigen::Index d = 0; d < t.F.cols(); ++d) {
      if (t.F(i, d) < 0.0) {
        spdlog::warn("{}: aggregated final demand F({}, {}) = {} is negative", reader.path(), t.label(i),
                     t.countries[d], t.F(i, d));
      }
    }
  }
  spdlog::debug("{}: loaded {} countries x {} industries", reader.path(), c, s);
  return t;
}

void write_wiot(const IOTable& t, const std::filesystem::path& path) {
  validate(t);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  out << kWiotHeader << '\n';
  const auto n = t.size();
  const auto s = t.industry_count();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& oc = t.countries[i / s];
    const auto& oi = t.industries[i % s];
    for (std::size_t j = 0; j < n; ++j) {
      const double z = t.Z(i, j);
      if (z == 0.0) continue;
      out << oc << ',' << oi << ",Z," << t.countries[j / s] << ',' << t.industries[j % s] << ','
          << csv::format_exact(z) << '\n';
    }
    for (std::size_t d = 0; d < t.country_count(); ++d) {
      const double f = t.F(i, d);
      if (f == 0.0) continue;
      out << oc << ',' << oi << ",F," << t.countries[d] << ",FD," << csv::format_exact(f) << '\n';
    }
    out << oc << ',' << oi << ",X,,," << csv::format_exact(t.x[i]) << '\n';
  }
}

std::string to_string(PruneReason reason) {
  switch (reason) {
    case PruneReason::kZeroOutput:
      return "zero_output";
    case PruneReason::kNoFlows:
      return "no_flows";
  }
  return "unknown";
}

std::vector<std::size_t> TechSystem::retained() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < keep_mask.size(); ++i) {
    if (keep_mask[i]) out.push_back(i);
  }
  return out;
}

TechSystem build_tech_system(const IOTable& t, const Tolerances& tol) {
  validate(t);
  const auto n = static_cast<Eigen::Index>(t.size());
  const auto s = t.industry_count();
  TechSystem sys;
  sys.keep_mask.assign(n, true);
  for (Eigen::Index j = 0; j < n; ++j) {
    std::optional<PruneReason> reason;
    if (t.x[j] <= tol.output_floor) {
      reason = PruneReason::kZeroOutput;
    } else if (t.Z.row(j).isZero(0.0) && t.Z.col(j).isZero(0.0) && t.F.row(j).isZero(0.0)) {
      reason = PruneReason::kNoFlows;
    }
    if (reason) {
      sys.keep_mask[j] = false;
      sys.prune_report.push_back({static_cast<std::size_t>(j), t.countries[j / s], t.industries[j % s], *reason});
    }
  }

  sys.A = Eigen::MatrixXd::Zero(n, n);
  sys.v = Eigen::VectorXd::Zero(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (!sys.keep_mask[j]) continue;
    double column_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!sys.keep_mask[i]) continue;
      const double a = t.Z(i, j) / t.x[j];
      sys.A(i, j) = a;
      column_sum += a;
    }
    if (column_sum > 1.0 + tol.coeff_tol) {
      throw DataError(fmt::format(
          "year {}: intermediate inputs of '{}' (column {}) sum to {:.9g} of gross output; value added "
          "would be negative",
          t.year, t.label(j), j, column_sum));
    }
    double share = 1.0 - column_sum;
    if (share < 0.0) {
      spdlog::warn("year {}: value-added share of '{}' is {:.3g}; clamped to 0", t.year, t.label(j), share);
      share = 0.0;
      ++sys.clamped_shares;
    }
    sys.v[j] = share;
  }
  if (!sys.prune_report.empty()) {
    spdlog::info("year {}: pruned {} degenerate industries", t.year, sys.prune_report.size());
  }
  return sys;
}

LeontiefSolver::LeontiefSolver(const TechSystem& sys, const Tolerances& tol)
    : sys_(&sys), tol_(tol), retained_(sys.retained()) {
  const auto r = static_cast<Eigen::Index>(retained_.size());
  system_.resize(r, r);
  for (Eigen::Index b = 0; b < r; ++b) {
    for (Eigen::Index a = 0; a < r; ++a) {
      system_(a, b) = (a == b ? 1.0 : 0.0) - sys.A(retained_[a], retained_[b]);
    }
  }
  if (r == 0) return;
  lu_.compute(system_);
  const auto& lu = lu_.matrixLU();
  for (Eigen::Index k = 0; k < r; ++k) {
    const double pivot = lu(k, k);
    if (!std::isfinite(pivot) || std::abs(pivot) < tol_.pivot_floor) {
      throw NumericalError(fmt::format(
          "Leontief system is numerically singular: pivot {} of {} is {:.3g} (floor {:.3g})", k, r, pivot,
          tol_.pivot_floor));
    }
  }
}

Eigen::MatrixXd LeontiefSolver::solve(const Eigen::MatrixXd& B) const {
  const auto n = static_cast<Eigen::Index>(sys_->size());
  if (B.rows() != n) {
    throw DataError(fmt::format("right-hand side has {} rows, system has {}", B.rows(), n));
  }
  const auto r = static_cast<Eigen::Index>(retained_.size());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, B.cols());
  if (r == 0 || B.cols() == 0) return M;

  Eigen::MatrixXd rhs(r, B.cols());
  for (Eigen::Index a = 0; a < r; ++a) rhs.row(a) = B.row(retained_[a]);
  const Eigen::MatrixXd sol = lu_.solve(rhs);

  const Eigen::MatrixXd residual = system_ * sol - rhs;
  const double residual_norm = residual.cwiseAbs().rowwise().sum().maxCoeff();
  const double rhs_norm = rhs.cwiseAbs().rowwise().sum().maxCoeff();
  if (!std::isfinite(residual_norm) || residual_norm > tol_.solve_tol * rhs_norm) {
    throw NumericalError(fmt::format("Leontief solve residual {:.3g} exceeds {:.1g} x |B| = {:.3g}",
                                     residual_norm, tol_.solve_tol, tol_.solve_tol * rhs_norm));
  }
  for (Eigen::Index a = 0; a < r; ++a) M.row(retained_[a]) = sol.row(a);
  return M;
}

Eigen::MatrixXd leontief_solve(const TechSystem& sys, const Eigen::MatrixXd& B, const Tolerances& tol) {
  return LeontiefSolver(sys, tol).solve(B);
}

VAXMatrix compute_vax(const TechSystem& sys, const IOTable& t, const Tolerances& tol) {
  if (sys.size() != t.size()) {
    throw DataError(fmt::format("technical system has {} industries, table has {}", sys.size(), t.size()));
  }
  VAXMatrix vx;
  vx.year = t.year;
  vx.countries = t.countries;
  vx.industries = t.industries;
  vx.values = sys.v.asDiagonal() * leontief_solve(sys, t.F, tol);
  return vx;
}

void write_vax_csv(const VAXMatrix& vx, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  out << kVaxHeader << '\n';
  const auto s = vx.industries.size();
  const auto year = std::to_string(vx.year);
  for (std::size_t i = 0; i < vx.size(); ++i) {
    for (std::size_t d = 0; d < vx.countries.size(); ++d) {
      out << year << ',' << vx.countries[i / s] << ',' << vx.industries[i % s] << ',' << vx.countries[d]
          << ',' << csv::format_exact(vx.values(i, d)) << '\n';
    }
  }
}

VAXMatrix read_vax_csv(const std::filesystem::path& path) {
  csv::Reader reader(path);
  reader.expect_header(kVaxHeader);
  struct Cell {
    std::size_t oc, oi, dc;
    double value;
    std::size_t line;
  };
  LabelIndex countries, industries;
  std::vector<Cell> cells;
  std::optional<long long> year;
  while (reader.next()) {
    if (reader.size() != 5) {
      throw ParseError(reader.path(), reader.line_number(), reader.size() + 1, "expected 5 fields");
    }
    const auto y = reader.integer(0);
    if (year && *year != y) {
      throw ParseError(reader.path(), reader.line_number(), 1,
                       fmt::format("mixed years {} and {} in one file", *year, y));
    }
    year = y;
    Cell cell{countries.intern(reader.field(1)), industries.intern(reader.field(2)),
              countries.intern(reader.field(3)), reader.number(4), reader.line_number()};
    cells.push_back(cell);
  }
  if (!year) throw DataError(fmt::format("{}: no rows", reader.path()));
  VAXMatrix vx;
  vx.year = static_cast<int>(*year);
  vx.countries = countries.labels();
  vx.industries = industries.labels();
  const auto s = vx.industries.size();
  const auto c = vx.countries.size();
  vx.values = Eigen::MatrixXd::Zero(c * s, c);
  std::vector<bool> seen(c * s * c, false);
  for (const auto& cell : cells) {
    const auto row = cell.oc * s + cell.oi;
    if (seen[row * c + cell.dc]) {
      throw DataError(fmt::format("{}: line {}: duplicate entry {}/{} -> {}", reader.path(), cell.line,
                                  vx.countries[cell.oc], vx.industries[cell.oi], vx.countries[cell.dc]));
    }
    seen[row * c + cell.dc] = true;
    vx.values(row, cell.dc) = cell.value;
  }
  const auto missing = std::count(seen.begin(), seen.end(), false);
  if (missing > 0) {
    throw DataError(fmt::format("{}: {} of {} origin-destination cells missing", reader.path(), missing,
                                seen.size()));
  }
  return vx;
}

bool AccountingReport::gdp_ok() const {
  return std::none_of(flags.begin(), flags.end(),
                      [](const std::string& f) { return f.rfind("gdp_identity", 0) == 0; });
}

AccountingReport accounting_report(const IOTable& t, const TechSystem& sys, const VAXMatrix& vx,
                                   const Tolerances& tol) {
  AccountingReport rep;
  rep.year = t.year;
  const auto c = static_cast<Eigen::Index>(t.country_count());
  if (vx.values.rows() != t.F.rows() || vx.values.cols() != c) {
    throw DataError("VX matrix dimensions do not match the IO table");
  }
  const Eigen::RowVectorXd vx_sums = vx.values.colwise().sum();
  const Eigen::RowVectorXd f_sums = t.F.colwise().sum();
  for (Eigen::Index d = 0; d < c; ++d) {
    const double residual = vx_sums[d] - f_sums[d];
    const double scale = std::abs(f_sums[d]);
    const double relative = scale > 0.0 ? std::abs(residual) / scale : std::abs(residual);
    rep.gdp_residual.push_back(residual);
    rep.gdp_relative.push_back(relative);
    if (!(relative <= tol.identity_tol)) {
      rep.flags.push_back(fmt::format("gdp_identity[{}]: relative residual {:.3g} > {:.1g}", t.countries[d],
                                      relative, tol.identity_tol));
    }
  }
  rep.balance = row_balance_violations(t, tol.balance_tol);
  const Eigen::VectorXd uses = t.Z.rowwise().sum() + t.F.rowwise().sum();
  for (Eigen::Index i = 0; i < t.x.size(); ++i) {
    rep.max_balance_relative =
        std::max(rep.max_balance_relative, std::abs(t.x[i] - uses[i]) / std::max(1.0, std::abs(t.x[i])));
  }
  for (const auto& b : rep.balance) {
    rep.flags.push_back(fmt::format("row_balance[{}]: relative residual {:.3g} > {:.1g}", t.label(b.index),
                                    b.relative, tol.balance_tol));
  }
  rep.pruned = sys.prune_report.size();
  rep.clamped_shares = sys.clamped_shares;
  rep.v_min = std::numeric_limits<double>::infinity();
  rep.v_max = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < sys.size(); ++i) {
    if (!sys.keep_mask[i]) continue;
    rep.v_min = std::min(rep.v_min, sys.v[static_cast<Eigen::Index>(i)]);
    rep.v_max = std::max(rep.v_max, sys.v[static_cast<Eigen::Index>(i)]);
  }
  if (sys.retained().empty()) rep.v_min = rep.v_max = 0.0;
  return rep;
}

std::string format_report(const AccountingReport& rep, const IOTable& t) {
  std::string out = fmt::format("year: {}\n", rep.year);
  out += fmt::format("industries: {} ({} countries x {} industries), pruned: {}, clamped value-added shares: {}\n",
                     t.size(), t.country_count(), t.industry_count(), rep.pruned, rep.clamped_shares);
  out += fmt::format("value-added share range: [{}, {}]\n", csv::format_significant(rep.v_min, 6),
                     csv::format_significant(rep.v_max, 6));
  out += fmt::format("max row-balance relative residual: {}\n",
                     csv::format_significant(rep.max_balance_relative, 3));
  out += "gdp identity (destination, vx_sum - f_sum, relative):\n";
  for (std::size_t d = 0; d < rep.gdp_residual.size(); ++d) {
    out += fmt::format("  {},{},{}\n", t.countries[d], csv::format_significant(rep.gdp_residual[d], 3),
                       csv::format_significant(rep.gdp_relative[d], 3));
  }
  out += fmt::format("flags: {}\n", rep.flags.size());
  for (const auto& f : rep.flags) out += "  " + f + "\n";
  return out;
}

}  // namespace vaxho::io
