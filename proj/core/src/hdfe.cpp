#include "vaxho/hdfe.hpp"

#include "vaxho/error.hpp"
#include "vaxho/parallel.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <limits>
#include <optional>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace vaxho::hdfe {

namespace {

std::vector<std::string> split_product(const std::string& term) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = term.find('*', start);
    auto part = term.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
    part.erase(0, part.find_first_not_of(' '));
    part.erase(part.find_last_not_of(' ') + 1);
    out.push_back(part);
    if (pos == std::string::npos) return out;
    start = pos + 1;
  }
}

using Getter = std::optional<double> (*)(const panel::PanelRow&);

Getter column_getter(const std::string& name) {
  using panel::PanelRow;
  if (name == "log_vax") return [](const PanelRow& r) { return r.log_vax; };
  if (name == "vax") return [](const PanelRow& r) { return std::optional<double>(r.vax); };
  if (name == "log_lk_comp") return [](const PanelRow& r) { return r.log_lk_comp; };
  if (name == "log_LK_comp") return [](const PanelRow& r) { return r.log_LK_comp; };
  if (name == "log_lk_phys") return [](const PanelRow& r) { return r.log_lk_phys; };
  if (name == "log_LK_phys") return [](const PanelRow& r) { return r.log_LK_phys; };
  if (name == "log_skill_int") return [](const PanelRow& r) { return r.log_skill_int; };
  if (name == "log_skill_end") return [](const PanelRow& r) { return r.log_skill_end; };
  throw ConfigError(fmt::format("unknown panel column '{}'", name));
}

struct Term {
  std::string name;
  std::vector<std::string> factors;
  std::vector<Getter> getters;
};

std::vector<Term> resolve_terms(const RegressionSpec& spec) {
  std::vector<Term> terms;
  auto make = [](const std::string& name) {
    Term t;
    t.name = name;
    t.factors = split_product(name);
    for (const auto& f : t.factors) t.getters.push_back(column_getter(f));
    return t;
  };
  terms.push_back(make(spec.dependent));
  for (const auto& r : spec.resolved_regressors()) terms.push_back(make(r));
  return terms;
}

std::uint64_t panel_key(const panel::PanelRow& r, const FEDimension& dim) {
  const std::uint64_t t = dim.t ? static_cast<std::uint32_t>(r.t) + 1u : 0u;
  const std::uint64_t o = dim.o ? r.o + 1u : 0u;
  const std::uint64_t d = dim.d ? r.d + 1u : 0u;
  const std::uint64_t i = dim.i ? r.i + 1u : 0u;
  return (((t << 16 | o) << 16 | d) << 16) | i;
}

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t a) {
  while (parent[a] != a) {
    parent[a] = parent[parent[a]];
    a = parent[a];
  }
  return a;
}

}  // namespace

FEDimension FEDimension::parse(const std::string& text) {
  FEDimension dim;
  dim.name = text;
  for (const auto& part : split_product(text)) {
    bool* flag = part == "o" ? &dim.o : part == "d" ? &dim.d : part == "i" ? &dim.i : part == "t" ? &dim.t : nullptr;
    if (!flag) throw ConfigError(fmt::format("fixed effect '{}': unknown key '{}' (use o, d, i, t)", text, part));
    if (*flag) throw ConfigError(fmt::format("fixed effect '{}': key '{}' repeated", text, part));
    *flag = true;
  }
  return dim;
}

std::vector<std::uint32_t> densify(const std::vector<std::uint64_t>& keys, std::uint32_t* count) {
  std::unordered_map<std::uint64_t, std::uint32_t> index;
  index.reserve(keys.size() / 4 + 16);
  std::vector<std::uint32_t> ids(keys.size());
  for (std::size_t k = 0; k < keys.size(); ++k) {
    auto [it, inserted] = index.emplace(keys[k], static_cast<std::uint32_t>(index.size()));
    ids[k] = it->second;
  }
  if (count) *count = static_cast<std::uint32_t>(index.size());
  return ids;
}

FEGroups build_fe_groups(const panel::PanelDataset& panel, const std::vector<std::size_t>& rows,
                         const std::vector<FEDimension>& dims) {
  FEGroups groups;
  for (const auto& dim : dims) {
    std::vector<std::uint64_t> keys(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) keys[k] = panel_key(panel.rows[rows[k]], dim);
    std::uint32_t count = 0;
    groups.ids.push_back(densify(keys, &count));
    groups.counts.push_back(count);
  }
  return groups;
}

std::size_t absorbed_dummies(const FEGroups& groups) {
  switch (groups.dimensions()) {
    case 0:
      return 0;
    case 1:
      return groups.counts[0];
    case 2:
      break;
    default:
      throw ConfigError("at most two fixed-effect dimensions are supported");
  }
  const std::size_t g1 = groups.counts[0];
  const std::size_t g2 = groups.counts[1];
  std::vector<std::size_t> parent(g1 + g2);
  std::iota(parent.begin(), parent.end(), 0);
  for (std::size_t k = 0; k < groups.observations(); ++k) {
    const auto a = find_root(parent, groups.ids[0][k]);
    const auto b = find_root(parent, g1 + groups.ids[1][k]);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::size_t components = 0;
  for (std::size_t node = 0; node < parent.size(); ++node) {
    if (find_root(parent, node) == node) ++components;
  }
  return g1 + g2 - components;
}

DemeanResult within_demean(const Eigen::MatrixXd& columns, const FEGroups& groups, double tol,
                           std::size_t max_iter, unsigned threads) {
  if (columns.rows() == 0) throw DataError("cannot demean an empty sample");
  if (!(tol > 0.0)) throw ConfigError("demeaning tolerance must be positive");
  if (static_cast<std::size_t>(columns.rows()) != groups.observations() && groups.dimensions() > 0) {
    throw DataError("group ids do not match the number of observations");
  }
  DemeanResult result;
  result.values = columns;
  const auto dims = groups.dimensions();
  if (dims == 0) {
    result.converged = true;
    return result;
  }
  const auto n = static_cast<std::size_t>(columns.rows());
  std::vector<std::vector<double>> inv_size(dims);
  for (std::size_t g = 0; g < dims; ++g) {
    std::vector<double> counts(groups.counts[g], 0.0);
    for (const auto id : groups.ids[g]) counts[id] += 1.0;
    inv_size[g].resize(counts.size());
    for (std::size_t k = 0; k < counts.size(); ++k) inv_size[g][k] = 1.0 / counts[k];
  }

  const auto m = static_cast<std::size_t>(columns.cols());
  std::vector<std::size_t> iterations(m, 0);
  std::vector<char> converged(m, 0);
  parallel_for(m, threads, [&](std::size_t j) {
    double* x = result.values.col(static_cast<Eigen::Index>(j)).data();
    std::vector<double> sums;
    auto sweep = [&](std::size_t g) {
      const auto& ids = groups.ids[g];
      sums.assign(groups.counts[g], 0.0);
      for (std::size_t k = 0; k < n; ++k) sums[ids[k]] += x[k];
      double largest = 0.0;
      for (std::size_t q = 0; q < sums.size(); ++q) {
        sums[q] *= inv_size[g][q];
        largest = std::max(largest, std::abs(sums[q]));
      }
      for (std::size_t k = 0; k < n; ++k) x[k] -= sums[ids[k]];
      return largest;
    };
    if (dims == 1) {
      sweep(0);
      iterations[j] = 1;
      converged[j] = 1;
      return;
    }
    for (std::size_t it = 1; it <= max_iter; ++it) {
      double change = 0.0;
      for (std::size_t g = 0; g < dims; ++g) change = std::max(change, sweep(g));
      iterations[j] = it;
      if (change <= tol) {
        converged[j] = 1;
        return;
      }
    }
  });
  result.iterations = *std::max_element(iterations.begin(), iterations.end());
  result.converged = std::all_of(converged.begin(), converged.end(), [](char c) { return c != 0; });
  if (!result.converged) {
    spdlog::warn("demeaning did not converge within {} iterations (tol {:.1g})", max_iter, tol);
  }
  return result;
}

OlsResult ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const std::vector<std::string>& names,
              double rank_tol) {
  if (y.size() != X.rows()) throw DataError("dependent variable and regressors differ in length");
  const auto k = X.cols();
  OlsResult out;
  if (k == 0) {
    out.coefficients.resize(0);
    out.residuals = y;
    return out;
  }
  if (X.rows() < k) throw NumericalError(fmt::format("{} observations for {} regressors", X.rows(), k));
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
  const Eigen::MatrixXd R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  auto rank_ok = [&](Eigen::Index cols) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(R.topLeftCorner(cols, cols));
    const auto& sv = svd.singularValues();
    const double largest = sv.maxCoeff();
    return largest > 0.0 && std::isfinite(largest) && sv.minCoeff() >= rank_tol * largest;
  };
  if (!rank_ok(k)) {
    for (Eigen::Index j = 0; j < k; ++j) {
      if (!rank_ok(j + 1)) {
        const auto name = j < static_cast<Eigen::Index>(names.size()) ? names[j] : fmt::format("column {}", j);
        throw NumericalError(fmt::format(
            "regressor '{}' is collinear with the preceding regressors or absorbed by the fixed effects", name));
      }
    }
  }
  out.coefficients = qr.solve(y);
  out.residuals = y - X * out.coefficients;
  return out;
}

std::string to_string(VcovFlavor flavor) { return flavor == VcovFlavor::kHC0 ? "HC0" : "HC1"; }

VcovFlavor parse_vcov(const std::string& text) {
  if (text == "HC0" || text == "hc0") return VcovFlavor::kHC0;
  if (text == "HC1" || text == "hc1") return VcovFlavor::kHC1;
  throw ConfigError(fmt::format("unknown vcov flavor '{}' (use HC0 or HC1)", text));
}

Eigen::MatrixXd robust_vcov(const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals, std::size_t n,
                            std::size_t k, std::size_t g_absorbed, VcovFlavor flavor) {
  if (X.cols() == 0) return Eigen::MatrixXd(0, 0);
  if (n <= k + g_absorbed) {
    throw NumericalError(fmt::format("non-positive residual degrees of freedom: n={} k={} absorbed={}", n, k,
                                     g_absorbed));
  }
  const auto p = X.cols();
  const Eigen::MatrixXd xtx = X.transpose() * X;
  const Eigen::MatrixXd bread = xtx.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd scaled = X.array().colwise() * residuals.array();
  const Eigen::MatrixXd meat = scaled.transpose() * scaled;
  Eigen::MatrixXd v = bread * meat * bread;
  v = 0.5 * (v + v.transpose()).eval();
  if (flavor == VcovFlavor::kHC1) {
    v *= static_cast<double>(n) / static_cast<double>(n - k - g_absorbed);
  }
  return v;
}

std::string to_string(Intensity intensity) {
  return intensity == Intensity::kCompensation ? "compensation" : "physical";
}

RegressionSpec RegressionSpec::baseline(Intensity intensity) {
  RegressionSpec spec;
  spec.intensity = intensity;
  spec.name = intensity == Intensity::kCompensation ? "comp" : "phys";
  spec.regressors = {"log_lk", "log_lk*log_LK"};
  return spec;
}

RegressionSpec RegressionSpec::extended(Intensity intensity) {
  auto spec = baseline(intensity);
  spec.name += "_skill";
  spec.regressors.push_back("log_skill_int");
  spec.regressors.push_back("log_skill_int*log_skill_end");
  return spec;
}

std::vector<std::string> RegressionSpec::resolved_regressors() const {
  const std::string suffix = intensity == Intensity::kCompensation ? "_comp" : "_phys";
  std::vector<std::string> out;
  for (const auto& term : regressors) {
    std::string resolved;
    for (const auto& factor : split_product(term)) {
      if (!resolved.empty()) resolved += '*';
      resolved += (factor == "log_lk" || factor == "log_LK") ? factor + suffix : factor;
    }
    out.push_back(resolved);
  }
  return out;
}

RegressionSpec parse_spec(const KeyValueConfig& config) {
  RegressionSpec spec;
  if (auto v = config.get_string("intensity")) {
    if (*v == "compensation") {
      spec.intensity = Intensity::kCompensation;
    } else if (*v == "physical") {
      spec.intensity = Intensity::kPhysical;
    } else {
      throw ConfigError(fmt::format("intensity must be 'compensation' or 'physical', got '{}'", *v));
    }
  }
  spec.name = config.get_string("name").value_or(spec.intensity == Intensity::kCompensation ? "comp" : "phys");
  if (auto v = config.get_string("dependent")) spec.dependent = *v;
  if (auto v = config.get_list("regressors")) spec.regressors = *v;
  if (auto v = config.get_list("fe")) spec.fe = *v;
  if (auto v = config.get_years("years")) spec.years = *v;
  if (auto v = config.get_list("broad_industries")) spec.broad_industries = *v;
  if (auto v = config.get_string("vcov")) spec.vcov = parse_vcov(*v);
  if (auto v = config.get_double("demean_tol")) spec.demean_tol = *v;
  if (auto v = config.get_int("max_iter")) spec.max_iter = static_cast<std::size_t>(*v);
  if (auto v = config.get_double("rank_tol")) spec.rank_tol = *v;
  config.reject_unused();
  resolve_terms(spec);  // validates column names
  for (const auto& fe : spec.fe) FEDimension::parse(fe);
  for (const auto& b : spec.broad_industries) panel::broad_industry_index(b);
  return spec;
}

double RegressionFit::p_value(std::size_t j) const { return std::erfc(std::abs(t_stat(j)) / std::sqrt(2.0)); }

std::vector<std::size_t> select_sample(const panel::PanelDataset& panel, const RegressionSpec& spec,
                                       std::vector<std::pair<std::string, std::size_t>>* excluded) {
  const auto terms = resolve_terms(spec);
  std::vector<std::string> factor_names;
  std::vector<Getter> getters;
  for (const auto& term : terms) {
    for (std::size_t f = 0; f < term.factors.size(); ++f) {
      if (std::find(factor_names.begin(), factor_names.end(), term.factors[f]) != factor_names.end()) continue;
      factor_names.push_back(term.factors[f]);
      getters.push_back(term.getters[f]);
    }
  }
  std::vector<std::uint8_t> broad;
  for (const auto& b : spec.broad_industries) broad.push_back(panel::broad_industry_index(b));

  std::size_t by_year = 0, by_industry = 0;
  std::vector<std::size_t> missing(factor_names.size(), 0);
  std::vector<std::size_t> rows;
  for (std::size_t k = 0; k < panel.rows.size(); ++k) {
    const auto& r = panel.rows[k];
    if (!spec.years.empty() && std::find(spec.years.begin(), spec.years.end(), r.t) == spec.years.end()) {
      ++by_year;
      continue;
    }
    if (!broad.empty() && std::find(broad.begin(), broad.end(), r.broad) == broad.end()) {
      ++by_industry;
      continue;
    }
    bool ok = true;
    for (std::size_t f = 0; f < getters.size(); ++f) {
      const auto value = getters[f](r);
      if (!value || !std::isfinite(*value)) {
        ++missing[f];
        ok = false;
        break;
      }
    }
    if (ok) rows.push_back(k);
  }
  if (excluded) {
    excluded->clear();
    excluded->emplace_back("year_filter", by_year);
    excluded->emplace_back("industry_filter", by_industry);
    for (std::size_t f = 0; f < factor_names.size(); ++f) excluded->emplace_back("missing_" + factor_names[f], missing[f]);
  }
  return rows;
}

Eigen::MatrixXd design_matrix(const panel::PanelDataset& panel, const std::vector<std::size_t>& rows,
                              const RegressionSpec& spec) {
  const auto terms = resolve_terms(spec);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(terms.size()));
  for (std::size_t c = 0; c < terms.size(); ++c) {
    for (std::size_t k = 0; k < rows.size(); ++k) {
      double value = 1.0;
      for (const auto getter : terms[c].getters) {
        const auto v = getter(panel.rows[rows[k]]);
        if (!v) throw DataError(fmt::format("row {} lacks '{}'", rows[k], terms[c].name));
        value *= *v;
      }
      m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = value;
    }
  }
  return m;
}

RegressionFit estimate(const panel::PanelDataset& panel, const RegressionSpec& spec) {
  RegressionFit fit;
  fit.spec = spec.name;
  fit.flavor = spec.vcov;
  fit.terms = spec.resolved_regressors();
  fit.rows_considered = panel.rows.size();

  const auto rows = select_sample(panel, spec, &fit.excluded);
  if (rows.empty()) throw DataError(fmt::format("spec '{}': estimation sample is empty", spec.name));
  if (spec.fe.empty()) throw ConfigError(fmt::format("spec '{}': at least one fixed effect is required", spec.name));

  std::vector<FEDimension> dims;
  for (const auto& fe : spec.fe) dims.push_back(FEDimension::parse(fe));
  const auto groups = build_fe_groups(panel, rows, dims);
  fit.group_counts = groups.counts;
  fit.g_absorbed = absorbed_dummies(groups);

  const Eigen::MatrixXd raw = design_matrix(panel, rows, spec);
  const auto demeaned = within_demean(raw, groups, spec.demean_tol, spec.max_iter, spec.threads);
  fit.iterations = demeaned.iterations;
  fit.converged = demeaned.converged;

  const auto k = static_cast<Eigen::Index>(fit.terms.size());
  for (Eigen::Index j = 1; j <= k; ++j) {
    const double spread = (raw.col(j).array() - raw.col(j).mean()).matrix().norm();
    if (demeaned.values.col(j).norm() <= spec.absorbed_tol * spread || spread == 0.0) {
      throw NumericalError(fmt::format("spec '{}': regressor '{}' is absorbed by the fixed effects", spec.name,
                                       fit.terms[static_cast<std::size_t>(j - 1)]));
    }
  }
  const Eigen::VectorXd y = demeaned.values.col(0);
  const Eigen::MatrixXd X = demeaned.values.rightCols(k);
  const auto solution = ols(y, X, fit.terms, spec.rank_tol);

  fit.n_obs = rows.size();
  fit.k_regressors = static_cast<std::size_t>(k);
  fit.coefficients = solution.coefficients;
  fit.vcov = robust_vcov(X, solution.residuals, fit.n_obs, fit.k_regressors, fit.g_absorbed, spec.vcov);
  fit.std_errors = fit.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();

  const double ssr = solution.residuals.squaredNorm();
  const double tss_within = y.squaredNorm();
  const Eigen::VectorXd y_raw = raw.col(0);
  const double tss = (y_raw.array() - y_raw.mean()).matrix().squaredNorm();
  fit.r2_within = tss_within > 0.0 ? 1.0 - ssr / tss_within : 0.0;
  fit.r2_full = tss > 0.0 ? 1.0 - ssr / tss : 0.0;
  const double df = static_cast<double>(fit.n_obs) - static_cast<double>(fit.k_regressors + fit.g_absorbed);
  fit.r2_adj_full = df > 0.0 ? 1.0 - (1.0 - fit.r2_full) * (static_cast<double>(fit.n_obs) - 1.0) / df
                             : std::numeric_limits<double>::quiet_NaN();

  std::string ledger;
  for (const auto& [reason, count] : fit.excluded) {
    if (count > 0) ledger += fmt::format(" {}={}", reason, count);
  }
  spdlog::info("spec '{}': {} of {} rows used (excluded:{}), absorbed {} dummies, {} demeaning iterations", spec.name,
               fit.n_obs, fit.rows_considered, ledger.empty() ? " none" : ledger, fit.g_absorbed, fit.iterations);
  return fit;
}

std::vector<GroupFit> estimate_by_group(const panel::PanelDataset& panel, const RegressionSpec& spec,
                                        Grouping grouping, std::size_t min_obs, const std::vector<std::string>& only,
                                        unsigned threads) {
  std::vector<std::pair<std::string, RegressionSpec>> candidates;
  auto wanted = [&](const std::string& label) {
    return only.empty() || std::find(only.begin(), only.end(), label) != only.end();
  };
  if (grouping == Grouping::kBroadIndustry) {
    for (const auto label_view : panel::kBroadIndustries) {
      const std::string label(label_view);
      if (!wanted(label)) continue;
      if (!spec.broad_industries.empty() &&
          std::find(spec.broad_industries.begin(), spec.broad_industries.end(), label) == spec.broad_industries.end()) {
        continue;
      }
      auto s = spec;
      s.name = spec.name + "_" + label;
      s.broad_industries = {label};
      candidates.emplace_back(label, s);
    }
  } else {
    std::vector<int> years;
    for (const auto& r : panel.rows) years.push_back(r.t);
    std::sort(years.begin(), years.end());
    years.erase(std::unique(years.begin(), years.end()), years.end());
    for (const int y : years) {
      const auto label = std::to_string(y);
      if (!wanted(label)) continue;
      if (!spec.years.empty() && std::find(spec.years.begin(), spec.years.end(), y) == spec.years.end()) continue;
      auto s = spec;
      s.name = spec.name + "_" + label;
      s.years = {y};
      candidates.emplace_back(label, s);
    }
  }

  std::vector<std::pair<std::string, RegressionSpec>> runnable;
  for (auto& [label, s] : candidates) {
    const auto n = select_sample(panel, s).size();
    if (n < min_obs) {
      spdlog::warn("group '{}': {} observations below minimum {}; skipped", label, n, min_obs);
      continue;
    }
    s.threads = 1;
    runnable.emplace_back(label, std::move(s));
  }
  std::vector<std::optional<GroupFit>> slots(runnable.size());
  parallel_for(runnable.size(), threads, [&](std::size_t g) {
    try {
      slots[g] = GroupFit{runnable[g].first, estimate(panel, runnable[g].second)};
    } catch (const NumericalError& e) {
      spdlog::warn("group '{}' skipped: {}", runnable[g].first, e.what());
    }
  });
  std::vector<GroupFit> fits;
  for (auto& s : slots) {
    if (s) fits.push_back(std::move(*s));
  }
  return fits;
}

}  // namespace vaxho::hdfe
