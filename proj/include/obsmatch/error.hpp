#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace obsmatch {

enum class ErrorCode {
    InvalidArgument,
    Validation,
    DivergedOrbit,
    BasinConfiguration,
    Evaluation,
    Breakpoint,
    DataQuality,
    InsufficientTail,
    DegenerateSample,
    FitFailure,
    InfiniteH,
    Model,
    UnsupportedOrder,
    UnknownName,
    Io,
};

const char* to_string(ErrorCode code) noexcept;

// Every failure raised by the library carries one of the codes above so the
// C layer can map it without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

class DivergedOrbitError : public Error {
public:
    DivergedOrbitError(const std::string& what, long long index)
        : Error(ErrorCode::DivergedOrbit, what), index_(index) {}

    // Step index at which the orbit left the finite region, -1 when unknown.
    long long index() const noexcept { return index_; }

private:
    long long index_;
};

class FitFailureError : public Error {
public:
    FitFailureError(const std::string& what, std::vector<double> trace)
        : Error(ErrorCode::FitFailure, what), trace_(std::move(trace)) {}

    const std::vector<double>& trace() const noexcept { return trace_; }

private:
    std::vector<double> trace_;
};

} // namespace obsmatch
