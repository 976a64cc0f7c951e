#pragma once

#include <stdexcept>
#include <string>

namespace realpipe {

// Base class for everything thrown by this library. The CLI maps the
// subclasses onto process exit codes, so keep the taxonomy stable.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input bytes: CSV syntax, ragged rows, unreadable JSON.
struct ParseError : Error {
    using Error::Error;
};

// Structurally invalid tables: duplicate column names, duplicate row ids,
// mismatched column lengths, dtype violations.
struct SchemaError : Error {
    using Error::Error;
};

// Invalid configuration: unknown kinds, malformed specs, bad flag values.
struct ConfigError : Error {
    using Error::Error;
};

// Data that is unusable at runtime: missing values in consumed columns,
// wrong dtypes reaching a transformer, empty datasets.
struct DataError : Error {
    using Error::Error;
};

// A caller broke an operation precondition, e.g. predicting on a table that
// lacks a feature the model consumes.
struct ContractError : Error {
    using Error::Error;
};

// Pipeline fitting or validation failed.
struct PipelineError : Error {
    using Error::Error;
};

// A row id or lookup key was not found.
struct LookupError : Error {
    using Error::Error;
};

// The request exceeds an implementation limit, e.g. exact enumeration over
// too many features, or an explanation kind with no producer.
struct CapabilityError : Error {
    using Error::Error;
};

} // namespace realpipe
