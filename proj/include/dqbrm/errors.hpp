#pragma once

#include <stdexcept>
#include <string>

namespace dqbrm {

// Invalid experiment or model configuration (bad parameters, singular basis, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The importance-sampling mixture has zero density at a drawn point.
class SupportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Optimal and myopic benchmark values coincide, so percent optimality is undefined.
class DegenerateBenchmarkError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace dqbrm
