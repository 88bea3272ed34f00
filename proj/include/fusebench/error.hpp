#pragma once

#include <stdexcept>
#include <string>

namespace fusebench {

// Base of every error the engine raises. The CLI maps all of these to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or invalid input data (feature files, score files, images).
class IngestError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values (ranges, steps, targets, flags).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Evaluation protocol violations: empty score lists, misaligned tables.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Degenerate or impossible geometry (coincident eyes, bad circles, empty crops).
class GeometryError : public Error {
 public:
  using Error::Error;
};

// Array shapes that an operation cannot accept.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A referenced sample that the dataset does not know about.
class DataIntegrityError : public Error {
 public:
  using Error::Error;
};

// Score computation failures: dimension mismatch, zero-norm operands.
class MatchError : public Error {
 public:
  using Error::Error;
};

// Every iris subimage pair has zero combined mask weight; the score is undefined.
class OccludedError : public MatchError {
 public:
  using MatchError::MatchError;
};

}  // namespace fusebench
