#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cper {

// Base for every error the library raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violated by the caller (bad dimension, out-of-range value...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// A vector with zero (or denormal) norm reached a cosine computation.
class DegenerateVector : public Error {
 public:
  using Error::Error;
};

// Attention over an empty persona history.
class EmptyHistory : public Error {
 public:
  using Error::Error;
};

// Model provider unreachable or still failing after all retries.
class BackendUnavailable : public Error {
 public:
  explicit BackendUnavailable(const std::string& what,
                              std::vector<std::size_t> failed_indices = {})
      : Error(what), failed_indices_(std::move(failed_indices)) {}

  // For sample_n: which sample slots failed.
  const std::vector<std::size_t>& failed_indices() const { return failed_indices_; }

 private:
  std::vector<std::size_t> failed_indices_;
};

// Provider answered, but not in the expected wire format.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Request validation failure carrying the offending field names.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, std::vector<std::string> fields)
      : Error(what), fields_(std::move(fields)) {}

  const std::vector<std::string>& fields() const { return fields_; }

 private:
  std::vector<std::string> fields_;
};

}  // namespace cper
