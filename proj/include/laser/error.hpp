#pragma once

#include <stdexcept>
#include <string>

namespace laser {

// Root of every error raised by the library. The CLI maps each subclass to a
// message and a nonzero exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Violated precondition on an operation's arguments.
class ContractError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf produced at an op boundary.
class NumericError : public Error {
 public:
  using Error::Error;
};

class OptimizerError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

// Malformed or mismatched dataset / checkpoint file.
class LoadError : public Error {
 public:
  using Error::Error;
};

class AgentError : public Error {
 public:
  using Error::Error;
};

// A loss went non-finite during policy training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace laser
