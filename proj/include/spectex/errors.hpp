#pragma once

#include <stdexcept>
#include <string>

namespace spectex {

/// Base class of every error raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape, channel count or option values that cannot work together.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Reading or writing a file failed, or a file ended early.
class IoError : public Error {
public:
    using Error::Error;
};

/// A weight container has a bad magic, version or layout.
class WeightFormatError : public Error {
public:
    using Error::Error;
};

/// A weight container failed its CRC-32 check.
class CorruptionError : public Error {
public:
    using Error::Error;
};

/// A weight set does not match the expected layer chain.
class WeightValidationError : public Error {
public:
    WeightValidationError(std::string record, const std::string& what)
        : Error(record + ": " + what), record_(std::move(record)) {}

    /// Name of the first offending record.
    const std::string& record() const noexcept { return record_; }

private:
    std::string record_;
};

/// The spectrum constraint needs output dims equal to the exemplar dims.
class SpectrumSizeError : public Error {
public:
    using Error::Error;
};

} // namespace spectex
