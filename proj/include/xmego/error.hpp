#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xmego {

enum class ErrorCode {
  EmptyName,
  MalformedXml,
  InvalidCoordinate,
  InvalidHeading,
  InvalidTimestamp,
  UnknownFact,
  AliasCollision,
  AllLinesInvalid,
  UnknownUser,
  UnknownEntity,
  MalformedForm,
  ConflictingTemporal,
  NoCandidates,
  EmptyDataset,
  AlreadyForked,
  ExhaustedSampling,
  UnknownQuery,
  InvalidFeedback,
  InvalidArgument,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyName: return "EmptyName";
    case ErrorCode::MalformedXml: return "MalformedXml";
    case ErrorCode::InvalidCoordinate: return "InvalidCoordinate";
    case ErrorCode::InvalidHeading: return "InvalidHeading";
    case ErrorCode::InvalidTimestamp: return "InvalidTimestamp";
    case ErrorCode::UnknownFact: return "UnknownFact";
    case ErrorCode::AliasCollision: return "AliasCollision";
    case ErrorCode::AllLinesInvalid: return "AllLinesInvalid";
    case ErrorCode::UnknownUser: return "UnknownUser";
    case ErrorCode::UnknownEntity: return "UnknownEntity";
    case ErrorCode::MalformedForm: return "MalformedForm";
    case ErrorCode::ConflictingTemporal: return "ConflictingTemporal";
    case ErrorCode::NoCandidates: return "NoCandidates";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::AlreadyForked: return "AlreadyForked";
    case ErrorCode::ExhaustedSampling: return "ExhaustedSampling";
    case ErrorCode::UnknownQuery: return "UnknownQuery";
    case ErrorCode::InvalidFeedback: return "InvalidFeedback";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

// Every failure in the library surfaces as this exception; `code()` is the
// stable machine-readable part, `detail()` carries context such as a byte
// offset or the offending token.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string detail = {})
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        message_(std::move(message)),
        detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string message_;
  std::string detail_;
};

}  // namespace xmego
