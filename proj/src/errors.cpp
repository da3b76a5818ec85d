#include "dpls/errors.hpp"

namespace dpls {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::MissingColumn: return "MissingColumn";
        case ErrorCode::EmptyPanel: return "EmptyPanel";
        case ErrorCode::NonNumericCell: return "NonNumericCell";
        case ErrorCode::ZeroVarianceColumn: return "ZeroVarianceColumn";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::GridEmpty: return "GridEmpty";
        case ErrorCode::NonFiniteActivation: return "NonFiniteActivation";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::InvalidLink: return "InvalidLink";
        case ErrorCode::NonConvergence: return "NonConvergence";
        case ErrorCode::TooFewPeriods: return "TooFewPeriods";
        case ErrorCode::TooFewObservations: return "TooFewObservations";
        case ErrorCode::ZeroVolatility: return "ZeroVolatility";
        case ErrorCode::InsufficientAssets: return "InsufficientAssets";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

bool is_validation_error(ErrorCode code) {
    switch (code) {
        case ErrorCode::MissingColumn:
        case ErrorCode::EmptyPanel:
        case ErrorCode::NonNumericCell:
        case ErrorCode::ZeroVarianceColumn:
        case ErrorCode::DimensionMismatch:
        case ErrorCode::InvalidConfig:
        case ErrorCode::GridEmpty:
        case ErrorCode::InvalidLink:
        case ErrorCode::TooFewPeriods:
        case ErrorCode::TooFewObservations:
            return true;
        default:
            return false;
    }
}

} // namespace dpls
