#include "obsmatch/error.hpp"

namespace obsmatch {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "invalid_argument";
        case ErrorCode::Validation: return "validation";
        case ErrorCode::DivergedOrbit: return "diverged_orbit";
        case ErrorCode::BasinConfiguration: return "basin_configuration";
        case ErrorCode::Evaluation: return "evaluation";
        case ErrorCode::Breakpoint: return "breakpoint";
        case ErrorCode::DataQuality: return "data_quality";
        case ErrorCode::InsufficientTail: return "insufficient_tail";
        case ErrorCode::DegenerateSample: return "degenerate_sample";
        case ErrorCode::FitFailure: return "fit_failure";
        case ErrorCode::InfiniteH: return "infinite_h";
        case ErrorCode::Model: return "model";
        case ErrorCode::UnsupportedOrder: return "unsupported_order";
        case ErrorCode::UnknownName: return "unknown_name";
        case ErrorCode::Io: return "io";
    }
    return "unknown";
}

} // namespace obsmatch
