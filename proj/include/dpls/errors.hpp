#pragma once

#include <stdexcept>
#include <string>

namespace dpls {

// Stable error identifiers. Validation errors map to CLI exit code 2,
// runtime errors to exit code 1.
enum class ErrorCode {
    MissingColumn,
    EmptyPanel,
    NonNumericCell,
    ZeroVarianceColumn,
    DimensionMismatch,
    InvalidConfig,
    GridEmpty,
    NonFiniteActivation,
    NonFiniteLoss,
    InvalidLink,
    NonConvergence,
    TooFewPeriods,
    TooFewObservations,
    ZeroVolatility,
    InsufficientAssets,
    IoError,
};

const char* error_code_name(ErrorCode code);

// Whether the code describes bad input (usage) rather than a runtime failure.
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code) {}

    ErrorCode code() const { return code_; }

  private:
    ErrorCode code_;
};

} // namespace dpls
