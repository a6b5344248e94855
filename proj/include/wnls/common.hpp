#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace wnls {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846264338327950288;

// Raised when a grid is too coarse for an exact pseudospectral product.
struct AliasingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when an integration blows up or a computed quantity is non-finite.
struct NumericalAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Two independent evaluations of the same quantity disagree.
struct ConsistencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Enumeration or combinatorial work would exceed the configured budget.
struct BudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace wnls
