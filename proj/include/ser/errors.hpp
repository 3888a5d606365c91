#pragma once

#include <stdexcept>
#include <string>

namespace ser {

// Base for everything thrown by this library. Subclasses that represent
// user or configuration mistakes map to CLI exit code 2; anything else
// is an internal error (exit code 1).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input data (bad WAV header, bad CSV row, bad container file).
class ParseError : public Error {
public:
    using Error::Error;
};

// Input is well-formed but uses a codec/layout we do not handle.
class UnsupportedFormat : public Error {
public:
    using Error::Error;
};

// A corpus file name carries an unknown label code.
class LabelError : public Error {
public:
    using Error::Error;
};

// A corpus scan produced no entries.
class EmptyCorpus : public Error {
public:
    using Error::Error;
};

// Stratified/grouped splitting is impossible for this manifest.
class StratifyError : public Error {
public:
    using Error::Error;
};

// Invalid configuration value (window sizes, FFT length, layer params...).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Tensor shape does not match what a layer expects.
class ShapeError : public Error {
public:
    using Error::Error;
};

// A model cannot be fit on the given data.
class FitError : public Error {
public:
    using Error::Error;
};

// Evaluation inputs are inconsistent (length mismatch, empty matrix).
class EvalError : public Error {
public:
    using Error::Error;
};

// Filesystem-level failure (unreadable/unwritable file).
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace ser
