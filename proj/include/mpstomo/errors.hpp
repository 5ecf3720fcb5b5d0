#pragma once

#include <stdexcept>
#include <string>

namespace mpstomo {

// Error taxonomy shared by every module. Callers that only care about
// "something went wrong" can catch std::exception; the CLI maps these onto
// distinct exit codes.

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ResourceLimit : public std::length_error {
 public:
  using std::length_error::length_error;
};

// Observable outside the span of {I, X, Z} strings for the ensemble in use.
class InvisibleObservable : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class InvalidOracle : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateDiagnostic : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mpstomo
