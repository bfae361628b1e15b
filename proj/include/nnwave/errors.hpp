#ifndef NNWAVE_ERRORS_HPP
#define NNWAVE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace nnwave {

// Error categories map 1:1 onto CLI exit codes: usage errors are handled by
// the argument parser (1), ValidationError/ParseError/ConfigError/LoadError
// exit 2, NumericError/TrainingDivergedError exit 3, IoError exit 4.

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input text (bad numeric field, wrong header, ...).
struct ParseError : Error {
    using Error::Error;
};

// Structurally valid input violating a domain invariant.
struct ValidationError : Error {
    using Error::Error;
};

// Inconsistent or incomplete configuration (missing upstream artifact,
// empty storm subset, unfitted scaler, ...).
struct ConfigError : Error {
    using Error::Error;
};

// Non-finite values produced by numeric code.
struct NumericError : Error {
    using Error::Error;
};

// Training produced a non-finite loss; carries where it happened.
struct TrainingDivergedError : NumericError {
    TrainingDivergedError(const std::string& msg, int epoch_, double lr_)
        : NumericError(msg), epoch(epoch_), lr(lr_) {}
    int epoch;
    double lr;
};

// Filesystem failures.
struct IoError : Error {
    using Error::Error;
};

// Model document cannot be loaded (version/shape/schema mismatch, truncation).
struct LoadError : Error {
    using Error::Error;
};

}  // namespace nnwave

#endif
