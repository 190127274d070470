#pragma once

#include <stdexcept>
#include <string>

namespace dkd {

/// Bad experiment configuration (unknown keys, missing sections, invalid values).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Dataset-level failure (missing files, row mismatches, bad labels).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Parse failure in an external file format; message carries file and line/offset.
class FormatError : public DataError {
public:
    explicit FormatError(const std::string& what) : DataError(what) {}
};

/// Failure to reach or keep talking to a remote source hypothesis.
/// Carries how many attempts were made against which endpoint.
class TransportError : public std::runtime_error {
public:
    TransportError(const std::string& what, std::string endpoint, int attempts)
        : std::runtime_error(what), endpoint_(std::move(endpoint)), attempts_(attempts) {}

    const std::string& endpoint() const { return endpoint_; }
    int attempts() const { return attempts_; }

private:
    std::string endpoint_;
    int attempts_;
};

/// The remote side answered, but with something malformed
/// (bad JSON, invalid probabilities, unexpected fields).
class ProtocolError : public std::runtime_error {
public:
    explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

/// Replay-only prediction cache was asked for an unrecorded instance.
class CacheMiss : public std::runtime_error {
public:
    explicit CacheMiss(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite loss or parameter during training; message carries
/// epoch/batch/instance diagnostics.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace dkd
