#include "vaxho/oracles.hpp"

#include "vaxho/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <map>
#include <queue>
#include <tuple>

namespace vaxho::synth {

Eigen::MatrixXd power_series_leontief(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, std::size_t k_max) {
  if (A.rows() != A.cols() || A.rows() != B.rows()) throw NumericalError("oracle: dimension mismatch");
  if (A.rows() > 64) throw NumericalError("oracle: power series limited to N <= 64");
  if (A.rows() > 0 && A.cwiseAbs().colwise().sum().maxCoeff() >= 1.0) {
    throw NumericalError("oracle: max column sum of A must be below 1");
  }
  Eigen::MatrixXd sum = B;
  Eigen::MatrixXd term = B;
  double previous = term.cwiseAbs().sum();
  for (std::size_t k = 1; k <= k_max; ++k) {
    term = A * term;
    const double norm = term.cwiseAbs().sum();
    if (norm > previous * (1.0 + 1e-12) && norm > 0.0) {
      throw NumericalError(fmt::format("oracle: power series term norm increased at k={}", k));
    }
    sum += term;
    previous = norm;
  }
  return sum;
}

namespace {

std::optional<double> lookup(const panel::PanelRow& r, const std::string& name) {
  if (name == "log_vax") return r.log_vax;
  if (name == "vax") return r.vax;
  if (name == "log_lk_comp") return r.log_lk_comp;
  if (name == "log_LK_comp") return r.log_LK_comp;
  if (name == "log_lk_phys") return r.log_lk_phys;
  if (name == "log_LK_phys") return r.log_LK_phys;
  if (name == "log_skill_int") return r.log_skill_int;
  if (name == "log_skill_end") return r.log_skill_end;
  throw NumericalError(fmt::format("oracle: unknown column '{}'", name));
}

std::optional<double> evaluate(const panel::PanelRow& r, const std::string& term) {
  double value = 1.0;
  std::size_t start = 0;
  for (;;) {
    const auto pos = term.find('*', start);
    const auto v = lookup(r, term.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (!v) return std::nullopt;
    value *= *v;
    if (pos == std::string::npos) return value;
    start = pos + 1;
  }
}

using Key = std::tuple<int, int, int, int>;  // o, d, i, t with -1 for unused

Key fe_key(const panel::PanelRow& r, const std::string& spec) {
  Key k{-1, -1, -1, -1};
  for (const char c : spec) {
    if (c == 'o') std::get<0>(k) = r.o;
    if (c == 'd') std::get<1>(k) = r.d;
    if (c == 'i') std::get<2>(k) = r.i;
    if (c == 't') std::get<3>(k) = r.t;
  }
  return k;
}

}  // namespace

DummyOlsResult dummy_ols_oracle(const panel::PanelDataset& panel, const hdfe::RegressionSpec& spec) {
  const auto terms = spec.resolved_regressors();
  std::vector<std::uint8_t> broad;
  for (const auto& b : spec.broad_industries) broad.push_back(panel::broad_industry_index(b));

  std::vector<double> y;
  std::vector<std::vector<double>> x;
  std::vector<const panel::PanelRow*> rows;
  for (const auto& r : panel.rows) {
    if (!spec.years.empty() && std::find(spec.years.begin(), spec.years.end(), r.t) == spec.years.end()) continue;
    if (!broad.empty() && std::find(broad.begin(), broad.end(), r.broad) == broad.end()) continue;
    const auto dep = evaluate(r, spec.dependent);
    if (!dep) continue;
    std::vector<double> values;
    bool ok = true;
    for (const auto& t : terms) {
      const auto v = evaluate(r, t);
      if (!v) {
        ok = false;
        break;
      }
      values.push_back(*v);
    }
    if (!ok) continue;
    y.push_back(*dep);
    x.push_back(std::move(values));
    rows.push_back(&r);
  }
  const auto n = y.size();
  if (n == 0) throw NumericalError("oracle: empty sample");
  if (n > 2000) throw NumericalError("oracle: dense dummy regression limited to n <= 2000");
  if (spec.fe.empty() || spec.fe.size() > 2) throw NumericalError("oracle: one or two fixed effects supported");

  std::vector<std::vector<int>> ids(spec.fe.size(), std::vector<int>(n));
  std::vector<int> counts;
  for (std::size_t f = 0; f < spec.fe.size(); ++f) {
    std::map<Key, int> index;
    for (std::size_t k = 0; k < n; ++k) {
      auto [it, inserted] = index.emplace(fe_key(*rows[k], spec.fe[f]), static_cast<int>(index.size()));
      ids[f][k] = it->second;
    }
    counts.push_back(static_cast<int>(index.size()));
  }

  // Reference columns of the second dimension: one per connected component.
  std::vector<bool> drop;
  if (spec.fe.size() == 2) {
    const int g1 = counts[0], g2 = counts[1];
    std::vector<std::vector<int>> adjacency(g1 + g2);
    for (std::size_t k = 0; k < n; ++k) {
      adjacency[ids[0][k]].push_back(g1 + ids[1][k]);
      adjacency[g1 + ids[1][k]].push_back(ids[0][k]);
    }
    std::vector<int> component(g1 + g2, -1);
    int components = 0;
    drop.assign(g2, false);
    for (int start = g1; start < g1 + g2; ++start) {
      if (component[start] >= 0) continue;
      drop[start - g1] = true;
      std::queue<int> queue;
      queue.push(start);
      component[start] = components;
      while (!queue.empty()) {
        const int node = queue.front();
        queue.pop();
        for (const int next : adjacency[node]) {
          if (component[next] < 0) {
            component[next] = components;
            queue.push(next);
          }
        }
      }
      ++components;
    }
  }

  const auto k = terms.size();
  std::vector<int> column_of_second;
  int dummy_columns = counts[0];
  if (spec.fe.size() == 2) {
    column_of_second.assign(counts[1], -1);
    for (int g = 0; g < counts[1]; ++g) {
      if (!drop[g]) column_of_second[g] = dummy_columns++;
    }
  }
  const auto p = static_cast<Eigen::Index>(k) + dummy_columns;
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), p);
  Eigen::VectorXd Y(static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    const auto rr = static_cast<Eigen::Index>(r);
    Y[rr] = y[r];
    for (std::size_t j = 0; j < k; ++j) W(rr, static_cast<Eigen::Index>(j)) = x[r][j];
    W(rr, static_cast<Eigen::Index>(k) + ids[0][r]) = 1.0;
    if (spec.fe.size() == 2 && column_of_second[ids[1][r]] >= 0) {
      W(rr, static_cast<Eigen::Index>(k) + column_of_second[ids[1][r]]) = 1.0;
    }
  }
  if (static_cast<Eigen::Index>(n) < p) throw NumericalError("oracle: fewer observations than parameters");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(W);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    throw NumericalError(fmt::format("oracle: dummy design has rank {} < {} columns", qr.rank(), p));
  }
  // H = (W'W)^{-1} W' = P R^{-1} Q'.
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), p);
  const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd RinvQt = R.triangularView<Eigen::Upper>().solve(Q.transpose());
  const Eigen::MatrixXd H = qr.colsPermutation() * RinvQt;

  DummyOlsResult out;
  out.n = n;
  out.dummy_columns = static_cast<std::size_t>(dummy_columns);
  const Eigen::VectorXd beta = H * Y;
  out.residuals = Y - W * beta;
  out.coefficients = beta.head(static_cast<Eigen::Index>(k));
  const Eigen::MatrixXd Hk = H.topRows(static_cast<Eigen::Index>(k));
  const Eigen::MatrixXd scaled = Hk.array().rowwise() * out.residuals.transpose().array();
  const Eigen::MatrixXd V = scaled * scaled.transpose();
  out.hc0_se = V.diagonal().cwiseMax(0.0).cwiseSqrt();
  return out;
}

}  // namespace vaxho::synth
