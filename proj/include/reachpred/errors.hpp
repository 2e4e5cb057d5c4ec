#pragma once

#include <stdexcept>

namespace reachpred {

// File system and parse failures.
class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// An algorithm failed to produce a usable result (planning, learning).
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace reachpred
