#pragma once

#include <stdexcept>
#include <string>

namespace hsplat {

/// Violated precondition or API contract. The CLI maps this to exit code 1.
class ContractViolation : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// Filesystem or serialization failure. The CLI maps this to exit code 2.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractViolation(msg);
}

} // namespace hsplat
