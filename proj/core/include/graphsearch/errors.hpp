#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace graphsearch {

/// Base of every error thrown by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

/// A persisted index file is missing, truncated, or of the wrong version.
class StoreError : public Error {
 public:
  StoreError(std::string file, const std::string& message)
      : Error(file + ": " + message), file_(std::move(file)) {}

  const std::string& file() const noexcept { return file_; }

 private:
  std::string file_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Build aborted; carries the offending document.
class BuildError : public Error {
 public:
  BuildError(std::string doc_id, const std::string& message)
      : Error("document '" + doc_id + "': " + message), doc_id_(std::move(doc_id)) {}

  const std::string& doc_id() const noexcept { return doc_id_; }

 private:
  std::string doc_id_;
};

/// Remote call failed after exhausting the retry policy.
class RemoteError : public Error {
 public:
  RemoteError(const std::string& message, int status = 0, bool retriable = false)
      : Error(message), status_(status), retriable_(retriable) {}

  int status() const noexcept { return status_; }
  bool retriable() const noexcept { return retriable_; }

 private:
  int status_;
  bool retriable_;
};

class RetrievalError : public Error {
 public:
  using Error::Error;
};

/// Scripted LLM transcript exhausted or not matching the issued prompt.
class FixtureError : public Error {
 public:
  using Error::Error;
};

/// A trace file could not be parsed; offset is the 1-based line number.
class CorruptTrace : public Error {
 public:
  CorruptTrace(std::size_t offset, const std::string& message)
      : Error("trace line " + std::to_string(offset) + ": " + message), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace graphsearch
