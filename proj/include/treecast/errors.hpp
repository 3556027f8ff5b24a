#ifndef TREECAST_ERRORS_HPP
#define TREECAST_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace treecast {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input does not satisfy the model or family schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// An operation was called outside its documented domain.
class PreconditionFailed : public Error {
 public:
  using Error::Error;
};

/// Two routes that must agree did not.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// The distributions are not supported on a common finite lattice; use the
/// splitting estimator instead.
class NotLatticeFinite : public Error {
 public:
  using Error::Error;
};

/// Every splitting repetition went extinct almost immediately.
class DegenerateExtinction : public Error {
 public:
  using Error::Error;
};

/// A threshold search was given a bracket whose endpoints share a verdict.
class NoSignChange : public Error {
 public:
  using Error::Error;
};

}  // namespace treecast

#endif  // TREECAST_ERRORS_HPP
