#ifndef UQGAZE_ERROR_HPP
#define UQGAZE_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace uqgaze {

enum class ErrorCode {
    ShapeMismatch,
    NoForwardPass,
    NonFiniteGradient,
    EmptyDataset,
    CorruptCheckpoint,
    GazeOutOfRange,
    IoFailure,
    BadImageFile,
    WrongCorruptionFamily,
    DegenerateInput,
    DegenerateSlopes,
    InsufficientCleanImages,
    InsufficientData,
    EmptyChart,
    BadConfig,
};

constexpr std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NoForwardPass: return "NoForwardPass";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::GazeOutOfRange: return "GazeOutOfRange";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::BadImageFile: return "BadImageFile";
    case ErrorCode::WrongCorruptionFamily: return "WrongCorruptionFamily";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::DegenerateSlopes: return "DegenerateSlopes";
    case ErrorCode::InsufficientCleanImages: return "InsufficientCleanImages";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::EmptyChart: return "EmptyChart";
    case ErrorCode::BadConfig: return "BadConfig";
    }
    return "Unknown";
}

/// Library-wide exception; `code()` is what callers (and the CLI exit-code map) dispatch on.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
    {
    }

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

} // namespace uqgaze

#endif
