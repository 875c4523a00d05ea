#pragma once

#include "vaxho/panel.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace vaxho::test {

// Panel rows drawn directly from the regression model
//   log vax = a_dit + s_ot + beta1 lk + kappa_i lk LK + e
// with industry intensities per (o, i, t) and endowments per (o, t). The
// physical columns equal the compensation columns plus a constant.
struct RandomPanelParams {
  std::size_t countries = 6;
  std::size_t industries = 4;
  std::vector<std::string> industry_codes;  // overrides `industries` when set
  std::size_t years = 2;
  double beta1 = -0.3;
  std::vector<double> kappa = {0.3};  // per industry, recycled
  double noise = 0.2;
  double effect_sigma = 0.5;
  bool skill = true;
  bool heteroskedastic = false;
  std::uint64_t seed = 1;
};

// Industry codes are taken one per broad section: A01, B, C10-C12, D35, F, ...
panel::PanelDataset random_panel(const RandomPanelParams& p);

}  // namespace vaxho::test
