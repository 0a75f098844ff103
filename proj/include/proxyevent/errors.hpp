#pragma once

#include <stdexcept>
#include <string>

namespace proxyevent {

// Error hierarchy. The CLI maps each family onto a distinct exit code.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class SpanError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data: bad JSONL lines, schema mismatches, unknown labels.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

/// Raised when a training loss turns non-finite.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& doc_id, const std::string& what)
      : Error("divergence on document '" + doc_id + "': " + what), doc_id_(doc_id) {}
  const std::string& doc_id() const { return doc_id_; }

 private:
  std::string doc_id_;
};

}  // namespace proxyevent
