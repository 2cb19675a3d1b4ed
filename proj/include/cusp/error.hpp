#pragma once

#include <stdexcept>
#include <string>

namespace cusp {

// Bad user input or violated precondition. CLI exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Solver breakdown, non-finite values, failed convergence. CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InputError(msg);
}

}  // namespace detail
}  // namespace cusp
