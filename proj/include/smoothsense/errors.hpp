#ifndef SMOOTHSENSE_ERRORS_HPP
#define SMOOTHSENSE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace smoothsense {

struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct invalid_input : error {
  using error::error;
};

struct dimension_mismatch : invalid_input {
  using invalid_input::invalid_input;
};

/// Normalized smoothness asked of an all-zero signal.
struct zero_signal : error {
  using error::error;
};

/// Separation loss is zero: all clusters coincide and the combined loss is undefined.
struct degenerate_separation : error {
  using error::error;
};

struct convergence_failure : error {
  using error::error;
};

struct non_finite_gradient : error {
  using error::error;
};

}  // namespace smoothsense

#endif  // SMOOTHSENSE_ERRORS_HPP
