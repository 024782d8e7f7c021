#ifndef EMM_ERROR_HPP
#define EMM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace emm {

// Raised when inputs violate a documented precondition (material, mesh, config).
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Raised for malformed config, material or expression text.
class ParseError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

// Raised when a numerical procedure cannot deliver its postcondition.
class SolverError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace emm

#endif // EMM_ERROR_HPP
