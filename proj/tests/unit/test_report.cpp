#include <doctest.h>

#include "temp_dir.hpp"
#include "vaxho/report.hpp"

#include <cmath>

using namespace vaxho;

namespace {

hdfe::RegressionFit make_fit(const std::string& spec, std::vector<double> coef, std::vector<double> se,
                             std::size_t n) {
  hdfe::RegressionFit fit;
  fit.spec = spec;
  fit.terms = {"log_lk_comp", "log_lk_comp*log_LK_comp"};
  fit.coefficients = Eigen::Map<Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
  fit.std_errors = Eigen::Map<Eigen::VectorXd>(se.data(), static_cast<Eigen::Index>(se.size()));
  fit.vcov = fit.std_errors.cwiseAbs2().asDiagonal();
  fit.n_obs = n;
  fit.k_regressors = 2;
  fit.g_absorbed = 1234;
  fit.r2_full = 0.5012345;
  fit.r2_adj_full = 0.4987654;
  fit.r2_within = 0.1;
  fit.converged = true;
  return fit;
}

}  // namespace

TEST_SUITE("report") {

TEST_CASE("significance stars at 0.1, 0.05, 0.01") {
  CHECK(report::stars(0.009) == "***");
  CHECK(report::stars(0.01) == "**");
  CHECK(report::stars(0.049) == "**");
  CHECK(report::stars(0.05) == "*");
  CHECK(report::stars(0.099) == "*");
  CHECK(report::stars(0.1) == "");
  CHECK(report::stars(0.7) == "");
}

TEST_CASE("two-sided normal p-values") {
  const auto fit = make_fit("x", {1.959963984540054, 1.0}, {1.0, 1.0}, 100);
  CHECK(fit.p_value(0) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(fit.p_value(1) == doctest::Approx(0.3173105078629141).epsilon(1e-9));
}

TEST_CASE("display names of terms") {
  CHECK(report::display_term("log_lk_comp") == "log(l/k)");
  CHECK(report::display_term("log_lk_phys*log_LK_phys") == "log(l/k) x log(L/K)");
  CHECK(report::display_term("log_skill_int*log_skill_end") == "log(l_hs/l_us) x log(L_hs/L_us)");
  CHECK(report::display_term("other") == "other");
}

TEST_CASE("fit and summary csv round-trip") {
  test::TempDir dir;
  const auto fit = make_fit("comp", {-0.324, 0.245}, {0.002, 0.004}, 1353446);
  report::write_fit_csv(fit, dir / "comp.csv");
  report::write_summary_csv({fit}, dir / "summary.csv");
  CHECK(test::read_file(dir / "comp.csv").rfind("term,coef,se,t\nlog_lk_comp,-0.324,0.002,", 0) == 0);
  const auto back = report::read_fit("comp", dir / "comp.csv", dir / "summary.csv");
  CHECK(back.terms == fit.terms);
  CHECK(back.coefficients == fit.coefficients);
  CHECK(back.std_errors == fit.std_errors);
  CHECK(back.n_obs == fit.n_obs);
  CHECK(back.g_absorbed == fit.g_absorbed);
  CHECK(back.r2_full == fit.r2_full);
  CHECK(back.converged);
  CHECK(report::format_table("T", {{"(1)", back}}) == report::format_table("T", {{"(1)", fit}}));
  CHECK_THROWS(report::read_fit("missing", dir / "comp.csv", dir / "summary.csv"));
}

TEST_CASE("table layout") {
  const auto a = make_fit("comp", {-0.324, 0.245}, {0.002, 0.004}, 1353446);
  const auto b = make_fit("phys", {0.0004, -0.015}, {0.0003, 0.0004}, 1409088);
  const auto text = report::format_table("Results", {{"(1)", a}, {"(3)", b}});
  CHECK(text.rfind("Results\n", 0) == 0);
  CHECK(text.find("-0.324***") != std::string::npos);
  CHECK(text.find("0.245***") != std::string::npos);
  CHECK(text.find("(0.004)") != std::string::npos);
  CHECK(text.find("-0.015***") != std::string::npos);
  CHECK(text.find("0.0004") != std::string::npos);
  CHECK(text.find("1,353,446") != std::string::npos);
  CHECK(text.find("1,409,088") != std::string::npos);
  CHECK(text.find("Adjusted R2") != std::string::npos);
  CHECK(text.find("0.501") != std::string::npos);
  CHECK(text.find("log(l/k) x log(L/K)") != std::string::npos);
  CHECK(text.find("*p<0.1; **p<0.05; ***p<0.01") != std::string::npos);
}

}
