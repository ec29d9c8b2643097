#include "vulnres/error.hpp"

namespace vulnres {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::NotADirectory: return "NotADirectory";
    case ErrorCode::ParseFailure: return "ParseFailure";
    case ErrorCode::MalformedBlock: return "MalformedBlock";
    case ErrorCode::SearchTextNotFound: return "SearchTextNotFound";
    case ErrorCode::SearchTextAmbiguous: return "SearchTextAmbiguous";
    case ErrorCode::NoMarkersFound: return "NoMarkersFound";
    case ErrorCode::NoChanges: return "NoChanges";
    case ErrorCode::EmptyHistory: return "EmptyHistory";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::SandboxUnavailable: return "SandboxUnavailable";
    case ErrorCode::UnknownName: return "UnknownName";
    case ErrorCode::WriteFailure: return "WriteFailure";
    case ErrorCode::LlmBackendError: return "LLMBackendError";
    case ErrorCode::ReportParseFailure: return "ReportParseFailure";
    case ErrorCode::JsonParseFailure: return "JSONParseFailure";
    case ErrorCode::EmbedderError: return "EmbedderError";
    case ErrorCode::ElementVanished: return "ElementVanished";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::ScriptExhausted: return "ScriptExhausted";
    case ErrorCode::ReplayDesync: return "ReplayDesync";
    case ErrorCode::VerifierFailure: return "VerifierFailure";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace vulnres
