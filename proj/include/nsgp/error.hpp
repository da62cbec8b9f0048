#pragma once

#include <stdexcept>
#include <string>

namespace nsgp {

/// Bad input files, malformed configuration or violated preconditions on
/// user-supplied data. Maps to CLI exit status 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical breakdown: failed factorizations, non-convergence, non-finite
/// likelihoods. Maps to CLI exit status 1.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nsgp
