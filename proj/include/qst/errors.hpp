// errors.hpp — error taxonomy shared by the library and the CLI exit codes.
#pragma once

#include <stdexcept>
#include <string>

namespace qst {

// invalid configuration / input file (CLI exit code 2)
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// a numeric routine failed or was called outside its domain (CLI exit code 3)
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// an iteration refused to converge (CLI exit code 4)
struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// a validity-regime precondition is violated; carries the offending ratio
struct RegimeError : NumericError {
    double ratio;
    RegimeError(const std::string& msg, double r) : NumericError(msg), ratio(r) {}
};

} // namespace qst
