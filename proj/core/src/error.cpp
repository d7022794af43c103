#include "orpose/error.hpp"

namespace orpose {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::PointBehindCamera: return "PointBehindCamera";
    case ErrorCode::InvalidRange: return "InvalidRange";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::DegenerateLimb: return "DegenerateLimb";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::InsufficientViews: return "InsufficientViews";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::MismatchedInputs: return "MismatchedInputs";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string &what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string &what) { throw Error(code, what); }

} // namespace orpose
