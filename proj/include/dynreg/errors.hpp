#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dynreg {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A configuration whose state space, regime set, or LP exceeds a size cap.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// An argmax that is not unique within the tie tolerance.
class AmbiguityError : public Error {
 public:
  AmbiguityError(const std::string& what, std::vector<int> tied)
      : Error(what), tied_(std::move(tied)) {}
  const std::vector<int>& tied() const { return tied_; }

 private:
  std::vector<int> tied_;
};

// The observed distribution is not reproducible by any latent distribution
// on the (masked) simplex: the model is refuted.
class ModelRefutedError : public Error {
 public:
  ModelRefutedError(const std::string& what, double gap) : Error(what), gap_(gap) {}
  double gap() const { return gap_; }

 private:
  double gap_;
};

// Internal contradiction, e.g. a cycle in a relation that must be acyclic.
class ConsistencyError : public Error {
 public:
  ConsistencyError(const std::string& what, std::vector<int> witness = {})
      : Error(what), witness_(std::move(witness)) {}
  const std::vector<int>& witness() const { return witness_; }

 private:
  std::vector<int> witness_;
};

// Bad or insufficient input data.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace dynreg
