#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pdiv {

enum class ErrorCode {
    MonotonePaths,
    InvalidPhaseType,
    InfiniteMean,
    UnsupportedModel,
    SingularResolvent,
    ConvergenceFailure,
    NearMultipleRoots,
    DegenerateDenominator,
    BracketFailure,
    QuadratureFailure,
    ViolationFound,
    InvalidArgument,
    InvalidConfig,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception type for every failure raised by the library.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace pdiv
