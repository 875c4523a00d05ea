#include <doctest.h>

#include "random_panel.hpp"
#include "vaxho/error.hpp"
#include "vaxho/hdfe.hpp"
#include "vaxho/oracles.hpp"

#include <cmath>
#include <random>
#include <set>
#include <tuple>

using namespace vaxho;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::vector<std::size_t> all_rows(const panel::PanelDataset& p) {
  std::vector<std::size_t> rows(p.rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) rows[k] = k;
  return rows;
}

std::vector<hdfe::FEDimension> default_dims() {
  return {hdfe::FEDimension::parse("d*i*t"), hdfe::FEDimension::parse("o*t")};
}

MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  MatrixXd m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = n(rng);
  return m;
}

double max_abs(const MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

panel::PanelRow row(std::uint16_t o, std::uint16_t d, std::uint16_t i, int t) {
  panel::PanelRow r;
  r.o = o;
  r.d = d;
  r.i = i;
  r.t = t;
  return r;
}

}  // namespace

TEST_SUITE("hdfe") {

TEST_CASE("fixed-effect dimension parsing") {
  const auto dit = hdfe::FEDimension::parse("d*i*t");
  CHECK((dit.d && dit.i && dit.t && !dit.o));
  const auto ot = hdfe::FEDimension::parse("o*t");
  CHECK((ot.o && ot.t && !ot.d && !ot.i));
  CHECK_THROWS(hdfe::FEDimension::parse("x*t"));
  CHECK_THROWS(hdfe::FEDimension::parse(""));
}

TEST_CASE("dense ids by first appearance") {
  panel::PanelDataset p;
  p.rows = {row(0, 1, 0, 2000), row(2, 1, 0, 2000), row(0, 2, 0, 2000), row(1, 2, 0, 2000)};
  const auto g = hdfe::build_fe_groups(p, all_rows(p), {hdfe::FEDimension::parse("d*i*t")});
  CHECK(g.ids[0] == std::vector<std::uint32_t>{0, 0, 1, 1});
  CHECK(g.counts[0] == 2);
  std::uint32_t count = 0;
  CHECK(hdfe::densify({7, 3, 7, 9, 3}, &count) == std::vector<std::uint32_t>{0, 1, 0, 2, 1});
  CHECK(count == 3);
}

TEST_CASE("single year: exporter-year groups are exporter groups") {
  test::RandomPanelParams rp;
  rp.years = 1;
  const auto p = test::random_panel(rp);
  const auto g = hdfe::build_fe_groups(p, all_rows(p), default_dims());
  CHECK(g.counts[1] == rp.countries);
}

TEST_CASE("group counts match an independent distinct-key scan") {
  test::RandomPanelParams rp;
  rp.countries = 7;
  rp.years = 3;
  const auto p = test::random_panel(rp);
  std::set<std::tuple<int, int, int>> dit;
  std::set<std::pair<int, int>> ot;
  for (const auto& r : p.rows) {
    dit.insert({r.d, r.i, r.t});
    ot.insert({r.o, r.t});
  }
  const auto g = hdfe::build_fe_groups(p, all_rows(p), default_dims());
  CHECK(g.counts[0] == dit.size());
  CHECK(g.counts[1] == ot.size());
}

TEST_CASE("absorbed dummies subtract connected components") {
  hdfe::FEGroups g;
  g.ids = {{0, 0, 1, 1}, {0, 1, 2, 3}};
  g.counts = {2, 4};
  CHECK(hdfe::absorbed_dummies(g) == 2 + 4 - 2);
  g.ids = {{0, 0, 1, 1}, {0, 1, 1, 2}};
  g.counts = {2, 3};
  CHECK(hdfe::absorbed_dummies(g) == 2 + 3 - 1);
  hdfe::FEGroups one;
  one.ids = {{0, 1, 1}};
  one.counts = {2};
  CHECK(hdfe::absorbed_dummies(one) == 2);
}

TEST_CASE("one dimension: exact group-mean subtraction in one pass") {
  std::mt19937_64 rng(3);
  hdfe::FEGroups g;
  g.ids = {{0, 1, 0, 2, 1, 0}};
  g.counts = {3};
  const MatrixXd M = random_matrix(6, 2, rng);
  const auto r = hdfe::within_demean(M, g);
  CHECK(r.converged);
  CHECK(r.iterations == 1);
  for (Eigen::Index c = 0; c < 2; ++c) {
    double mean[3] = {0, 0, 0};
    int size[3] = {0, 0, 0};
    for (int k = 0; k < 6; ++k) {
      mean[g.ids[0][k]] += M(k, c);
      ++size[g.ids[0][k]];
    }
    for (int k = 0; k < 6; ++k) {
      const auto id = g.ids[0][k];
      CHECK(std::abs(r.values(k, c) - (M(k, c) - mean[id] / size[id])) <= 1e-14);
    }
  }
}

TEST_CASE("demeaning is idempotent and linear") {
  const auto p = test::random_panel({});
  const auto g = hdfe::build_fe_groups(p, all_rows(p), default_dims());
  std::mt19937_64 rng(4);
  const auto n = static_cast<Eigen::Index>(p.rows.size());
  const MatrixXd M1 = random_matrix(n, 3, rng), M2 = random_matrix(n, 3, rng);
  const MatrixXd D1 = hdfe::within_demean(M1, g).values;
  const MatrixXd D2 = hdfe::within_demean(M2, g).values;
  CHECK(max_abs(hdfe::within_demean(D1, g).values - D1) <= 1e-7);
  const MatrixXd combo = hdfe::within_demean(2.5 * M1 - 0.75 * M2, g).values;
  CHECK(max_abs(combo - (2.5 * D1 - 0.75 * D2)) <= 1e-7);
}

TEST_CASE("demeaning does not depend on the thread count") {
  const auto p = test::random_panel({});
  const auto g = hdfe::build_fe_groups(p, all_rows(p), default_dims());
  std::mt19937_64 rng(5);
  const MatrixXd M = random_matrix(static_cast<Eigen::Index>(p.rows.size()), 4, rng);
  CHECK(hdfe::within_demean(M, g, 1e-8, 500, 1).values == hdfe::within_demean(M, g, 1e-8, 500, 3).values);
}

TEST_CASE("ols recovers an exact linear relation") {
  std::mt19937_64 rng(6);
  const MatrixXd X = random_matrix(30, 3, rng);
  const VectorXd beta = (VectorXd(3) << 1.5, -2.0, 0.25).finished();
  const auto r = hdfe::ols(X * beta, X);
  CHECK(max_abs(r.coefficients - beta) <= 1e-12);
  CHECK(max_abs(r.residuals) <= 1e-12);
}

TEST_CASE("ols rejects an all-zero column naming it") {
  std::mt19937_64 rng(7);
  MatrixXd X = random_matrix(20, 2, rng);
  X.col(1).setZero();
  try {
    hdfe::ols(VectorXd::Ones(20), X, {"a", "b"});
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("'b'") != std::string::npos);
  }
  MatrixXd Y = random_matrix(20, 3, rng);
  Y.col(2) = Y.col(0) - 2.0 * Y.col(1);
  CHECK_THROWS_AS(hdfe::ols(VectorXd::Ones(20), Y, {"a", "b", "c"}), NumericalError);
}

TEST_CASE("ols matches the normal equations on 50 rows") {
  std::mt19937_64 rng(8);
  const MatrixXd X = random_matrix(50, 4, rng);
  const VectorXd y = random_matrix(50, 1, rng);
  const MatrixXd XtX = X.transpose() * X;
  const VectorXd oracle = XtX.inverse() * (X.transpose() * y);
  CHECK(max_abs(hdfe::ols(y, X).coefficients - oracle) <= 1e-10);
}

TEST_CASE("robust vcov: zero residuals, HC1/HC0 ratio, df error") {
  std::mt19937_64 rng(9);
  const MatrixXd X = random_matrix(40, 2, rng);
  CHECK(hdfe::robust_vcov(X, VectorXd::Zero(40), 40, 2, 5, hdfe::VcovFlavor::kHC1).isZero(0.0));
  const VectorXd e = random_matrix(40, 1, rng);
  const MatrixXd hc0 = hdfe::robust_vcov(X, e, 40, 2, 5, hdfe::VcovFlavor::kHC0);
  const MatrixXd hc1 = hdfe::robust_vcov(X, e, 40, 2, 5, hdfe::VcovFlavor::kHC1);
  const double ratio = 40.0 / (40.0 - 2.0 - 5.0);
  for (Eigen::Index k = 0; k < hc0.size(); ++k) {
    CHECK(std::abs(hc1.data()[k] - ratio * hc0.data()[k]) <= 1e-15 * std::abs(hc1.data()[k]));
  }
  CHECK_THROWS_AS(hdfe::robust_vcov(X, e, 40, 2, 38, hdfe::VcovFlavor::kHC1), NumericalError);
}

TEST_CASE("HC0 approaches the classical vcov under homoskedasticity") {
  std::mt19937_64 rng(10);
  const Eigen::Index n = 20000;
  const MatrixXd X = random_matrix(n, 2, rng);
  const VectorXd e = 0.7 * random_matrix(n, 1, rng);
  const MatrixXd hc0 = hdfe::robust_vcov(X, e, static_cast<std::size_t>(n), 2, 0, hdfe::VcovFlavor::kHC0);
  const MatrixXd classical = e.squaredNorm() / static_cast<double>(n) * (X.transpose() * X).inverse();
  for (Eigen::Index j = 0; j < 2; ++j) CHECK(std::abs(hc0(j, j) / classical(j, j) - 1.0) < 0.05);
}

TEST_CASE("dummy-OLS oracle: one observation per group fits perfectly") {
  panel::PanelDataset p;
  p.countries = {"A", "B", "C"};
  p.industries = {"A01"};
  p.rows = {row(0, 1, 0, 2000), row(0, 2, 0, 2000), row(1, 2, 0, 2000), row(2, 0, 0, 2000)};
  for (std::size_t k = 0; k < p.rows.size(); ++k) {
    p.rows[k].vax = 1.0 + static_cast<double>(k);
    p.rows[k].log_vax = std::log(p.rows[k].vax);
  }
  auto spec = hdfe::RegressionSpec::baseline(hdfe::Intensity::kCompensation);
  spec.regressors = {};
  spec.fe = {"o*d*i*t"};
  const auto oracle = synth::dummy_ols_oracle(p, spec);
  CHECK(max_abs(oracle.residuals) <= 1e-12);
  const auto fit = hdfe::estimate(p, spec);
  CHECK(fit.r2_within == 0.0);
}

TEST_CASE("regressor constant within groups is rejected by estimate and oracle") {
  auto p = test::random_panel({});
  for (auto& r : p.rows) r.log_lk_comp = 0.1 * r.o + 0.01 * r.t;
  const auto spec = hdfe::RegressionSpec::baseline(hdfe::Intensity::kCompensation);
  CHECK_THROWS_AS(hdfe::estimate(p, spec), NumericalError);
  CHECK_THROWS_AS(synth::dummy_ols_oracle(p, spec), NumericalError);
}

TEST_CASE("Frisch-Waugh: demeaned OLS equals explicit dummies on 200 rows") {
  test::RandomPanelParams rp;
  rp.countries = 5;
  rp.industries = 5;
  rp.seed = 77;
  const auto p = test::random_panel(rp);
  REQUIRE(p.rows.size() == 200);
  auto spec = hdfe::RegressionSpec::baseline(hdfe::Intensity::kCompensation);
  spec.vcov = hdfe::VcovFlavor::kHC0;
  const auto fit = hdfe::estimate(p, spec);
  const auto oracle = synth::dummy_ols_oracle(p, spec);
  CHECK(oracle.dummy_columns == fit.g_absorbed);
  CHECK(max_abs(fit.coefficients - oracle.coefficients) <= 1e-8);
  CHECK(max_abs(fit.std_errors - oracle.hc0_se) <= 1e-8);
}

TEST_CASE("vcov is symmetric and positive semidefinite") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    test::RandomPanelParams rp;
    rp.seed = seed;
    rp.heteroskedastic = true;
    const auto fit = hdfe::estimate(test::random_panel(rp), hdfe::RegressionSpec::extended(hdfe::Intensity::kPhysical));
    const double norm = max_abs(fit.vcov);
    CHECK(max_abs(fit.vcov - fit.vcov.transpose()) <= 1e-12 * norm);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(fit.vcov);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10 * norm);
  }
}

TEST_CASE("scaling the dependent variable scales coefficients and errors") {
  auto p = test::random_panel({});
  const auto spec = hdfe::RegressionSpec::baseline(hdfe::Intensity::kCompensation);
  const auto base = hdfe::estimate(p, spec);
  const double c = 3.5;
  for (auto& r : p.rows) r.log_vax = c * *r.log_vax;
  const auto scaled = hdfe::estimate(p, spec);
  for (Eigen::Index j = 0; j < base.coefficients.size(); ++j) {
    CHECK(std::abs(scaled.coefficients[j] - c * base.coefficients[j]) <= 1e-9 * std::abs(c * base.coefficients[j]));
    CHECK(std::abs(scaled.std_errors[j] - c * base.std_errors[j]) <= 1e-9 * c * base.std_errors[j]);
    CHECK(std::abs(scaled.t_stat(static_cast<std::size_t>(j)) - base.t_stat(static_cast<std::size_t>(j))) <= 1e-7);
  }
}

TEST_CASE("shifting one importer-industry-year group changes no coefficient") {
  auto p = test::random_panel({});
  const auto spec = hdfe::RegressionSpec::baseline(hdfe::Intensity::kCompensation);
  const auto base = hdfe::estimate(p, spec);
  const auto& target = p.rows[3];
  const auto key = std::make_tuple(target.d, target.i, target.t);
  for (auto& r : p.rows) {
    if (std::make_tuple(r.d, r.i, r.t) == key) r.log_vax = *r.log_vax + 5.0;
  }
  const auto shifted = hdfe::estimate(p, spec);
  CHECK(max_abs(shifted.coefficients - base.coefficients) <= 1e-7);
}

TEST_CASE("sample ledger accounts for every row") {
  test::RandomPanelParams rp;
  rp.skill = false;
  auto p = test::random_panel(rp);
  p.rows[0].log_vax.reset();
  p.rows[0].flags |= panel::kNonPositiveVax;
  auto spec = hdfe::RegressionSpec::baseline(hdfe::Intensity::kCompensation);
  spec.years = {2000};
  const auto fit = hdfe::estimate(p, spec);
  std::size_t excluded = 0;
  for (const auto& [reason, n] : fit.excluded) excluded += n;
  CHECK(fit.rows_considered == p.rows.size());
  CHECK(fit.n_obs + excluded == fit.rows_considered);
  CHECK(fit.n_obs == p.rows.size() / 2 - 1);
  CHECK_THROWS_AS(hdfe::estimate(p, hdfe::RegressionSpec::extended(hdfe::Intensity::kCompensation)), DataError);
}

TEST_CASE("r-squared definitions") {
  const auto p = test::random_panel({});
  const auto fit = hdfe::estimate(p, hdfe::RegressionSpec::baseline(hdfe::Intensity::kCompensation));
  CHECK(fit.r2_full > fit.r2_within);
  CHECK(fit.r2_full < 1.0);
  const double n = static_cast<double>(fit.n_obs);
  const double df = n - static_cast<double>(fit.k_regressors + fit.g_absorbed);
  CHECK(fit.r2_adj_full == doctest::Approx(1.0 - (1.0 - fit.r2_full) * (n - 1.0) / df));
  CHECK(fit.converged);
}

TEST_CASE("spec files") {
  const auto cfg = KeyValueConfig::parse(
      "name = custom\nregressors = log_lk, log_lk*log_LK, log_skill_int\nintensity = physical\nvcov = HC0\n"
      "years = 2000-2001\nbroad_industries = A, C\n");
  const auto spec = hdfe::parse_spec(cfg);
  CHECK(spec.name == "custom");
  CHECK(spec.intensity == hdfe::Intensity::kPhysical);
  CHECK(spec.vcov == hdfe::VcovFlavor::kHC0);
  CHECK(spec.resolved_regressors() ==
        std::vector<std::string>{"log_lk_phys", "log_lk_phys*log_LK_phys", "log_skill_int"});
  CHECK(spec.years == std::vector<int>{2000, 2001});
  CHECK_THROWS_AS(hdfe::parse_spec(KeyValueConfig::parse("bogus = 1\n")), ConfigError);
}

TEST_CASE("per-group fits recover opposite planted signs") {
  test::RandomPanelParams rp;
  rp.countries = 8;
  rp.years = 2;
  rp.industry_codes = {"A01", "A02", "A03", "C10-C12", "C13-C15", "C16"};
  rp.kappa = {0.5, 0.5, 0.5, -0.5, -0.5, -0.5};
  const auto p = test::random_panel(rp);
  const auto spec = hdfe::RegressionSpec::baseline(hdfe::Intensity::kCompensation);
  const auto fits = hdfe::estimate_by_group(p, spec, hdfe::Grouping::kBroadIndustry, 50);
  REQUIRE(fits.size() == 2);
  CHECK(fits[0].group == "A");
  CHECK(fits[0].fit.coefficients[1] > 0.0);
  CHECK(fits[0].fit.t_stat(1) > 3.0);
  CHECK(fits[1].group == "C");
  CHECK(fits[1].fit.coefficients[1] < 0.0);
  CHECK(fits[1].fit.t_stat(1) < -3.0);

  const auto years = hdfe::estimate_by_group(p, spec, hdfe::Grouping::kYear, 50, {"2001"}, 2);
  REQUIRE(years.size() == 1);
  CHECK(years[0].group == "2001");
  CHECK(hdfe::estimate_by_group(p, spec, hdfe::Grouping::kYear, 100000).empty());
}

TEST_CASE("group fits do not depend on the thread count") {
  test::RandomPanelParams rp;
  rp.industry_codes = {"A01", "A02", "C10-C12", "C16"};
  const auto p = test::random_panel(rp);
  const auto spec = hdfe::RegressionSpec::baseline(hdfe::Intensity::kCompensation);
  const auto one = hdfe::estimate_by_group(p, spec, hdfe::Grouping::kBroadIndustry, 10, {}, 1);
  const auto four = hdfe::estimate_by_group(p, spec, hdfe::Grouping::kBroadIndustry, 10, {}, 4);
  REQUIRE(one.size() == four.size());
  for (std::size_t g = 0; g < one.size(); ++g) {
    CHECK(one[g].fit.coefficients == four[g].fit.coefficients);
    CHECK(one[g].fit.std_errors == four[g].fit.std_errors);
  }
}

}
