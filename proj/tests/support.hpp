#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <filesystem>
#include <limits>
#include <memory>
#include <string>

#include "clusterfit/stellar_model.hpp"

namespace clusterfit::test {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Adaptive Gauss-Kronrod integral of f over [a, b].
template <class F>
double integrate(F f, double a, double b, double tol = 1e-13) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, tol);
}

inline std::shared_ptr<const IsochroneTable> toy() {
  static const auto table = std::make_shared<const IsochroneTable>(toy_table(ToyModelConfig::defaults()));
  return table;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("clusterfit_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace clusterfit::test
