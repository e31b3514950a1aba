#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ezsdu {

enum class ErrorCode {
    InvalidParameters,
    DomainError,
    IllPosed,
    UnsupportedRegime,
    NotEvaluable,
    DivergentIntegral,
    DegenerateDenominator,
    InvalidStep,
    DimensionMismatch,
    MissingLambda,
    NotInClass,
    NotConverged,
    PreconditionFailed,
    SignDomainViolation,
    WellPosed,
    ParseError,
    ValidationError,
    ExperimentError,
    IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidParameters: return "InvalidParameters";
        case ErrorCode::DomainError: return "DomainError";
        case ErrorCode::IllPosed: return "IllPosed";
        case ErrorCode::UnsupportedRegime: return "UnsupportedRegime";
        case ErrorCode::NotEvaluable: return "NotEvaluable";
        case ErrorCode::DivergentIntegral: return "DivergentIntegral";
        case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
        case ErrorCode::InvalidStep: return "InvalidStep";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::MissingLambda: return "MissingLambda";
        case ErrorCode::NotInClass: return "NotInClass";
        case ErrorCode::NotConverged: return "NotConverged";
        case ErrorCode::PreconditionFailed: return "PreconditionFailed";
        case ErrorCode::SignDomainViolation: return "SignDomainViolation";
        case ErrorCode::WellPosed: return "WellPosed";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::ValidationError: return "ValidationError";
        case ErrorCode::ExperimentError: return "ExperimentError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

/// Library-wide exception. Every failure path carries a machine-readable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

/// Process exit status: 2 for input problems, 4 for I/O, 3 for numerical failures.
constexpr int exit_code(ErrorCode code) {
    switch (code) {
        case ErrorCode::ParseError:
        case ErrorCode::ValidationError:
        case ErrorCode::InvalidParameters:
            return 2;
        case ErrorCode::IoError:
            return 4;
        default:
            return 3;
    }
}

}  // namespace ezsdu
