#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace visphrase {

// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or internally inconsistent input file.
class FormatError : public Error {
 public:
  using Error::Error;
};

// A call violated its contract: dimension mismatch, bad argument,
// missing label, and the like.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Result is numerically undefined for the given input (zero-norm cosine,
// all-zero count matrix, AUC without both classes, singular covariance).
class NumericError : public Error {
 public:
  using Error::Error;
};

// Nearest-neighbour candidate pool is empty after filtering.
class EmptyPoolError : public Error {
 public:
  using Error::Error;
};

// No adjective qualified for the selectional-preference prototype.
class NoPrototypeError : public Error {
 public:
  using Error::Error;
};

// Operation needs fitted state (e.g. a fusion basis) that is missing.
class StateError : public Error {
 public:
  using Error::Error;
};

// Two inputs that must agree on their item ids do not. The offending
// ids are listed both in what() and as a structured member.
class AlignmentError : public ContractError {
 public:
  AlignmentError(const std::string& what, std::vector<std::string> offenders)
      : ContractError(join_message(what, offenders)), offenders_(std::move(offenders)) {}

  const std::vector<std::string>& offenders() const { return offenders_; }

 private:
  static std::string join_message(const std::string& what,
                                  const std::vector<std::string>& offenders) {
    std::string out = what;
    out += ": ";
    for (std::size_t i = 0; i < offenders.size(); ++i) {
      if (i > 0) out += ", ";
      out += offenders[i];
    }
    return out;
  }

  std::vector<std::string> offenders_;
};

}  // namespace visphrase
