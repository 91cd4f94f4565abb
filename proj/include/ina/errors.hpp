#pragma once

#include <stdexcept>
#include <string>

namespace ina {

/// Argument outside the mathematical domain of a formula (log of zero, W < 2, ...).
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Input data that fails a structural check (bad probabilities, malformed records, ids out of range).
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

} // namespace ina
