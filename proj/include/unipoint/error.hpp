#pragma once

#include <stdexcept>
#include <string>

namespace unipoint {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (dataset lines, config files, checkpoints).
class ParseError : public Error {
public:
  using Error::Error;
};

/// Input parsed fine but violates a data invariant.
class ValidationError : public Error {
public:
  using Error::Error;
};

class PreconditionError : public Error {
public:
  using Error::Error;
};

/// Statistics that cannot be computed from the given data (e.g. zero variance).
class DegenerateError : public Error {
public:
  using Error::Error;
};

/// Evaluation point outside the domain of a conditional intensity.
class DomainError : public Error {
public:
  using Error::Error;
};

class ShapeError : public Error {
public:
  using Error::Error;
};

/// Simulation produced more events than the runaway cap.
class RunawayError : public Error {
public:
  using Error::Error;
};

/// Training loss became non-finite.
class DivergenceError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

} // namespace unipoint
