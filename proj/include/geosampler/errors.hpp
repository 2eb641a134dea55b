#ifndef GEOSAMPLER_ERRORS_HPP
#define GEOSAMPLER_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace geosampler {

/// Input vector or matrix has the wrong length for the model it is used with.
class DimensionError : public std::invalid_argument {
public:
  DimensionError(const std::string& what, std::size_t expected, std::size_t got)
      : std::invalid_argument(what + ": expected dimension " + std::to_string(expected) +
                              ", got " + std::to_string(got)),
        expected_(expected), got_(got) {}

  std::size_t expected() const noexcept { return expected_; }
  std::size_t got() const noexcept { return got_; }

private:
  std::size_t expected_;
  std::size_t got_;
};

/// A model or configuration violates one of its invariants. `field()` is a
/// path such as "metric.factors[2]".
class ValidationError : public std::runtime_error {
public:
  ValidationError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

/// Malformed container (not a version-1 bundle, broken JSON, unreadable file).
class ParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Numerical breakdown: non-PD matrix or non-finite state while integrating.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Geodesic integration produced a non-finite state. `step()` is the
/// integrator step (or chain step when rethrown by the sampler).
class IntegrationError : public NumericalError {
public:
  IntegrationError(const std::string& what, std::size_t step)
      : NumericalError(what + " (step " + std::to_string(step) + ")"), step_(step) {}

  std::size_t step() const noexcept { return step_; }

private:
  std::size_t step_;
};

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace geosampler

#endif  // GEOSAMPLER_ERRORS_HPP
