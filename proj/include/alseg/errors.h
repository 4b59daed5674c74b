#pragma once

#include <stdexcept>
#include <string>

namespace alseg {

// Caller broke a documented precondition (shape mismatch, length mismatch...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed corpus, vocabulary, checkpoint or request payload.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Metric requested on input for which it is not defined (e.g. empty corpus).
class UndefinedMetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values showed up during optimisation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace alseg
