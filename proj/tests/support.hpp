#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>

#include "cadenza/neuralcore.hpp"
#include "cadenza/rng.hpp"

namespace testing {

using cadenza::Matrix;

inline Matrix random_matrix(cadenza::Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("cadenza_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// |a - n| / max(|a|, |n|, floor). The floor keeps near-zero entries from
// turning round-off into huge relative errors.
inline double rel_err(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Central differences of f over every entry of x; returns the largest
// relative error against `analytic`.
inline double max_fd_error(Matrix& x, const Matrix& analytic, const std::function<double()>& f, double h = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = x.data()[i];
    x.data()[i] = saved + h;
    const double up = f();
    x.data()[i] = saved - h;
    const double down = f();
    x.data()[i] = saved;
    worst = std::max(worst, rel_err(analytic.data()[i], (up - down) / (2 * h)));
  }
  return worst;
}

inline double max_fd_error(Eigen::VectorXd& x, const Eigen::VectorXd& analytic, const std::function<double()>& f,
                           double h = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f();
    x[i] = saved - h;
    const double down = f();
    x[i] = saved;
    worst = std::max(worst, rel_err(analytic[i], (up - down) / (2 * h)));
  }
  return worst;
}

}  // namespace testing
