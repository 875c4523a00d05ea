#include <doctest.h>

#include "temp_dir.hpp"
#include "vaxho/error.hpp"
#include "vaxho/hdfe.hpp"
#include "vaxho/oracles.hpp"
#include "vaxho/synth.hpp"

#include <cmath>

using namespace vaxho;
using Eigen::MatrixXd;

namespace {

panel::PanelDataset panel_of(const synth::World& w) {
  panel::PanelBuilder builder(w.sea());
  for (const auto& y : w.years) {
    const auto sys = io::build_tech_system(y.table);
    builder.append(panel::long_format(io::compute_vax(sys, y.table)));
  }
  return std::move(builder).finish();
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("generated tables satisfy the table invariants") {
  synth::WorldParams p;
  p.countries = 6;
  p.industries = 7;
  p.years = 3;
  const auto w = synth::generate_world(p);
  REQUIRE(w.years.size() == 3);
  for (const auto& y : w.years) {
    const auto& t = y.table;
    CHECK_NOTHROW(io::validate(t));
    CHECK(t.size() == 42);
    CHECK(io::row_balance_violations(t, 1e-12).empty());
    CHECK(t.F.minCoeff() >= 0.0);
    CHECK(t.Z.minCoeff() >= 0.0);
    const auto sys = io::build_tech_system(t);
    CHECK(sys.prune_report.empty());
    CHECK(sys.A.colwise().sum().maxCoeff() <= p.intermediate_strength + 1e-12);
    CHECK(sys.v.minCoeff() >= 0.0);
    CHECK(sys.v.maxCoeff() <= 1.0);
  }
}

TEST_CASE("decomposition recovers the planted value-added exports") {
  synth::WorldParams p;
  p.countries = 5;
  p.industries = 6;
  p.intermediate_strength = 0.6;
  const auto w = synth::generate_world(p);
  for (const auto& y : w.years) {
    const auto sys = io::build_tech_system(y.table);
    const auto vx = io::compute_vax(sys, y.table);
    const MatrixXd diff = vx.values - y.planted_vax;
    CHECK(diff.cwiseAbs().maxCoeff() <= 1e-9 * y.planted_vax.cwiseAbs().maxCoeff());
    const auto rep = io::accounting_report(y.table, sys, vx);
    CHECK(rep.ok());
  }
}

TEST_CASE("SEA endowments equal the planted log endowments") {
  synth::WorldParams p;
  p.countries = 4;
  p.industries = 5;
  const auto w = synth::generate_world(p);
  const auto ratios = panel::intensities_and_endowments(w.sea());
  const auto codes = synth::country_codes(4);
  for (std::size_t c = 0; c < 4; ++c) {
    for (int year : {2000, 2001}) {
      const auto& r = ratios.country.at({codes[c], year});
      CHECK(std::log(*r.LK_comp) == doctest::Approx(w.params.log_endowments[c]).epsilon(1e-12));
      CHECK(*r.LK_phys == doctest::Approx(*r.LK_comp * p.rental / p.wage).epsilon(1e-12));
    }
  }
  for (const auto& rec : w.sea()) {
    CHECK(rec.has_skill());
    CHECK(*rec.hours_high_skill + *rec.hours_medium_skill + *rec.hours_low_skill ==
          doctest::Approx(*rec.hours_worked).epsilon(1e-12));
  }
}

TEST_CASE("generation is deterministic per seed and independent of threads") {
  synth::WorldParams p;
  p.years = 3;
  const auto a = synth::generate_world(p, 1);
  const auto b = synth::generate_world(p, 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(a.years[k].table.Z == b.years[k].table.Z);
    CHECK(a.years[k].table.F == b.years[k].table.F);
    CHECK(a.years[k].planted_vax == synth::generate_year(p, k).planted_vax);
  }
  p.seed = 43;
  const auto c = synth::generate_world(p, 1);
  CHECK(c.years[0].table.F != a.years[0].table.F);

  test::TempDir d1, d2;
  synth::write_world(a, d1.path());
  synth::write_world(b, d2.path());
  for (const char* name : {"wiot_2000.csv", "wiot_2002.csv", "sea.csv", "concordance.csv"}) {
    CHECK(test::read_file(d1 / name) == test::read_file(d2 / name));
  }
}

TEST_CASE("written worlds load back unchanged") {
  synth::WorldParams p;
  p.countries = 3;
  p.industries = 2;
  p.years = 1;
  const auto w = synth::generate_world(p);
  test::TempDir dir;
  synth::write_world(w, dir.path());
  const auto t = io::load_wiot(dir / "wiot_2000.csv", 2000);
  CHECK(t.Z == w.years[0].table.Z);
  CHECK(t.F == w.years[0].table.F);
  CHECK(t.x == w.years[0].table.x);
  CHECK(panel::load_sea(dir / "sea.csv").size() == 6);
}

TEST_CASE("invalid parameters are rejected") {
  auto bad = [](auto edit) {
    synth::WorldParams p;
    edit(p);
    CHECK_THROWS_AS(synth::generate_world(p), DataError);
  };
  bad([](synth::WorldParams& p) { p.labor_shares = {0.5, 0.5, 1.0, 0.5, 0.5, 0.5}; });
  bad([](synth::WorldParams& p) { p.labor_shares = {0.5, 0.0, 0.5, 0.5, 0.5, 0.5}; });
  bad([](synth::WorldParams& p) { p.labor_shares = {0.5}; });
  bad([](synth::WorldParams& p) { p.countries = 1; });
  bad([](synth::WorldParams& p) { p.industries = 57; });
  bad([](synth::WorldParams& p) { p.intermediate_strength = 0.95; });
  bad([](synth::WorldParams& p) { p.noise_sigma = -1.0; });
  bad([](synth::WorldParams& p) { p.years = 0; });
}

TEST_CASE("country and industry codes") {
  const auto c = synth::country_codes(45);
  CHECK(c[0] == "AUS");
  CHECK(c[43] == "X001");
  CHECK(synth::industry_codes(56) == panel::wiod_industry_codes());
  CHECK_THROWS_AS(synth::industry_codes(57), DataError);
}

TEST_CASE("random coefficients respect the column-sum bound") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const MatrixXd A = synth::random_coefficients(9, 0.9, 0.5, seed);
    CHECK(A.minCoeff() >= 0.0);
    CHECK(A.colwise().sum().maxCoeff() <= 0.9 + 1e-15);
  }
  CHECK_THROWS_AS(synth::random_coefficients(3, 1.0, 0.5, 1), DataError);
}

TEST_CASE("power series agrees with the solver on a random 8x8 system") {
  const MatrixXd A = synth::random_coefficients(8, 0.85, 0.6, 21);
  const MatrixXd B = MatrixXd::Identity(8, 8);
  const MatrixXd M = io::leontief_solve(synth::tech_system_from(A), B);
  CHECK((M - synth::power_series_leontief(A, B, 200)).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("planted positive interaction is recovered with |t| > 3") {
  synth::WorldParams p;
  p.countries = 12;
  p.industries = 8;
  p.kappa = 0.3;
  const auto panel = panel_of(synth::generate_world(p));
  CHECK(panel.rows.size() == 12u * 11u * 8u * 2u);
  const auto fit = hdfe::estimate(panel, hdfe::RegressionSpec::baseline(hdfe::Intensity::kCompensation));
  CHECK(fit.coefficients[1] > 0.0);
  CHECK(fit.t_stat(1) > 3.0);
  // physical intensities differ from compensation ones by a constant, so the
  // interaction coefficient is the same
  const auto phys = hdfe::estimate(panel, hdfe::RegressionSpec::baseline(hdfe::Intensity::kPhysical));
  CHECK(phys.coefficients[1] == doctest::Approx(fit.coefficients[1]).epsilon(1e-6));
}

TEST_CASE("synthetic panels satisfy the panel invariants") {
  synth::WorldParams p;
  p.countries = 4;
  p.industries = 3;
  const auto panel = panel_of(synth::generate_world(p));
  for (auto s : panel::kSamples) {
    const auto ledger = panel.ledger(s);
    CHECK(ledger.raw == ledger.retained + ledger.dropped_total());
    CHECK(ledger.retained == panel.rows.size());
  }
}

}
