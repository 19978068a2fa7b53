#pragma once

#include <Eigen/Dense>

#include <numbers>
#include <stdexcept>
#include <string>

namespace stochheat {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double pi = std::numbers::pi;

/// Raised when an iterative numerical kernel (eigensolver) fails to converge.
class NumericalFailure : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool condition, const std::string &message) {
  if (!condition)
    throw std::invalid_argument(message);
}

inline void require_domain(bool condition, const std::string &message) {
  if (!condition)
    throw std::domain_error(message);
}

} // namespace detail
} // namespace stochheat
