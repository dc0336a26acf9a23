#pragma once

#include <stdexcept>
#include <string>

namespace tabprov {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unusable input bytes (CSV, corpus, vocabulary files).
class IngestionError : public Error {
 public:
  using Error::Error;
};

/// Document does not satisfy the table schema or a table invariant.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A token budget cannot be honoured (e.g. the header row alone is too large).
class BudgetError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration: unknown kinds, missing parameters, inconsistent fields.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Row/column/cell index outside the table.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Unknown table id in the table manager.
class UnknownTableError : public Error {
 public:
  using Error::Error;
};

/// Failure reported by a remote embedding or LLM endpoint.
class ProviderError : public Error {
 public:
  ProviderError(const std::string& what, int status = 0)
      : Error(what), status_(status) {}

  /// HTTP status of the last attempt; 0 when no response was received.
  int status() const noexcept { return status_; }

 private:
  int status_;
};

enum class Stage { sampling, augmentation, packing };

const char* to_string(Stage stage) noexcept;

/// Pipeline error tagged with the stage that raised it.
class StageError : public Error {
 public:
  StageError(Stage stage, const std::string& what)
      : Error(std::string(to_string(stage)) + ": " + what), stage_(stage) {}

  Stage stage() const noexcept { return stage_; }

 private:
  Stage stage_;
};

}  // namespace tabprov
