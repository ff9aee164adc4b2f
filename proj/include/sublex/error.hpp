#pragma once

#include <stdexcept>
#include <string>

namespace sublex {

// Error classes map 1:1 onto CLI exit codes (see tools/sublex.cpp).
enum class ErrorCode : int {
    IoError = 2,
    ParseError = 3,
    EmptyCorpus = 4,
    MissingFrequency = 5,
    LabelConflict = 6,
    UnknownSymbol = 7,
    IncompatibleModel = 8,
    NumericalFailure = 9,
    Unsupported = 10,
    DegenerateQuery = 11,
    MissingAssignment = 12,
    NonTerminating = 13,
    InvalidArgument = 14,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& msg)
        : std::runtime_error(msg), code_(code) {}

    ErrorCode code() const noexcept { return code_; }
    int exit_code() const noexcept { return static_cast<int>(code_); }

private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& msg) {
    throw Error(code, msg);
}

} // namespace sublex
