#include "lodweaver/error.hpp"

namespace lodweaver {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidReference: return "InvalidReference";
    case ErrorCode::UnboundPlaceholder: return "UnboundPlaceholder";
    case ErrorCode::InvalidIri: return "InvalidIri";
    case ErrorCode::MalformedResults: return "MalformedResults";
    case ErrorCode::UnsupportedTerm: return "UnsupportedTerm";
    case ErrorCode::EndpointUnreachable: return "EndpointUnreachable";
    case ErrorCode::HttpStatus: return "HttpStatus";
    case ErrorCode::PageLimitExceeded: return "PageLimitExceeded";
    case ErrorCode::NoUsablePairs: return "NoUsablePairs";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::EmptyCluster: return "EmptyCluster";
    case ErrorCode::MintCollision: return "MintCollision";
    case ErrorCode::UnknownEntity: return "UnknownEntity";
    case ErrorCode::NoTemplate: return "NoTemplate";
    case ErrorCode::EmptyQuery: return "EmptyQuery";
  }
  return "Unknown";
}

namespace {

std::string describe(ErrorCode code, const std::string& file, const std::string& field,
                     const std::string& value) {
  std::string out{to_string(code)};
  out += "(";
  out += file;
  if (!field.empty()) out += ", " + field;
  if (!value.empty()) out += ", " + value;
  out += ")";
  return out;
}

}  // namespace

ConfigError::ConfigError(ErrorCode code, std::string file, std::string field, std::string value)
    : Error(code, describe(code, file, field, value)),
      file_(std::move(file)),
      field_(std::move(field)),
      value_(std::move(value)) {}

}  // namespace lodweaver
