#pragma once

#include <stdexcept>
#include <string>

namespace thrustopt {

/// Argument outside an operation's domain (bad index, negative magnitude,
/// non-finite input, dimension mismatch).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Numerical failure that is not the caller's fault (non-convergent
/// exponential, singular factorisation).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace thrustopt
