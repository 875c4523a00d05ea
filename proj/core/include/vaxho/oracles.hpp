#pragma once

// Brute-force reference implementations. Test-scale only.

#include "vaxho/hdfe.hpp"
#include "vaxho/panel.hpp"

#include <Eigen/Dense>

#include <cstddef>

namespace vaxho::synth {

// sum_{k=0}^{k_max} A^k B. Requires max column sum of A < 1 and N <= 64;
// throws NumericalError if the term norm stops decreasing.
Eigen::MatrixXd power_series_leontief(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                      std::size_t k_max);

struct DummyOlsResult {
  Eigen::VectorXd coefficients;  // regressors only
  Eigen::VectorXd hc0_se;
  Eigen::VectorXd residuals;
  std::size_t n = 0;
  std::size_t dummy_columns = 0;  // after dropping reference columns
};

// Regression on the explicit dummy matrix of the spec's fixed-effect
// dimensions; one reference dummy of the last dimension is dropped per
// connected component. Requires n <= 2000.
DummyOlsResult dummy_ols_oracle(const panel::PanelDataset& panel, const hdfe::RegressionSpec& spec);

}  // namespace vaxho::synth
