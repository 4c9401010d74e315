#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lodweaver {

enum class ErrorCode {
  // config
  MissingFile,
  ParseError,
  InvalidReference,
  UnboundPlaceholder,
  // rdf
  InvalidIri,
  MalformedResults,
  UnsupportedTerm,
  // ingestion
  EndpointUnreachable,
  HttpStatus,
  PageLimitExceeded,
  NoUsablePairs,
  IoError,
  SchemaVersionMismatch,
  // reconciliation
  EmptyCluster,
  MintCollision,
  // relations / api
  UnknownEntity,
  NoTemplate,
  // index
  EmptyQuery,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Config loading failures name the offending file and, for dangling
// references, the field and value.
class ConfigError : public Error {
 public:
  ConfigError(ErrorCode code, std::string file, std::string field, std::string value);

  const std::string& file() const noexcept { return file_; }
  const std::string& field() const noexcept { return field_; }
  const std::string& value() const noexcept { return value_; }

 private:
  std::string file_;
  std::string field_;
  std::string value_;
};

class HttpError : public Error {
 public:
  HttpError(int status, std::string message)
      : Error(ErrorCode::HttpStatus, std::move(message)), status_(status) {}

  int status() const noexcept { return status_; }

 private:
  int status_;
};

}  // namespace lodweaver
