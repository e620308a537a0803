#pragma once

#include <stdexcept>
#include <string>

namespace emlab {

// Thrown when a caller breaks a documented precondition (bad position,
// malformed sequence, incompatible objective/candidate combination, ...).
class ContractViolation : public std::logic_error {
public:
  explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

// Thrown when an exhaustive computation would exceed its configured entry cap.
class CapacityError : public std::runtime_error {
public:
  explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace emlab
