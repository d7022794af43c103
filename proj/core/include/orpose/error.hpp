#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace orpose {

enum class ErrorCode {
    PointBehindCamera,
    InvalidRange,
    DegenerateConfiguration,
    DegenerateLimb,
    EmptyInput,
    ConfigMismatch,
    InvalidConfig,
    Infeasible,
    InsufficientViews,
    ShapeMismatch,
    MismatchedInputs,
    IoError,
    ParseError,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a machine-readable code so that
// callers (the frame pipeline in particular) can record it and keep going.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string &what);

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string &what);

} // namespace orpose
