#ifndef CONCEPTSEG_ERRORS_HPP
#define CONCEPTSEG_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace conceptseg {

// Violated precondition or shape contract.
struct ContractError : std::logic_error {
  explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

// Non-finite values where finite ones are required.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Infeasible generation request (e.g. object placement failed).
struct GenerationError : std::runtime_error {
  explicit GenerationError(const std::string& what) : std::runtime_error(what) {}
};

// Bad run configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem failure (CLI exit code 3).
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace conceptseg

#endif
