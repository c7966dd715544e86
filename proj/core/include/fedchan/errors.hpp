#pragma once

#include <stdexcept>
#include <string>

namespace fedchan {

/// Base class for every error raised by the library. `kind()` is a short
/// machine-readable tag used by the CLI for single-line error output.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

/// Dimension or shape mismatch between layers, weights and inputs.
class StructuralError : public Error {
public:
    explicit StructuralError(const std::string& message) : Error("structural", message) {}
};

/// Non-finite values or degenerate data encountered during training.
class TrainingError : public Error {
public:
    explicit TrainingError(const std::string& message) : Error("training", message) {}
};

/// Malformed dataset, weight file or config file.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& message) : Error("parse", message) {}
};

/// Exchange payload rejected (wrong magic, round, client or shape).
class ProtocolError : public Error {
public:
    explicit ProtocolError(const std::string& message) : Error("protocol", message) {}
};

/// Bad argument value (out-of-range fraction, empty input, unknown name).
class ArgumentError : public Error {
public:
    explicit ArgumentError(const std::string& message) : Error("argument", message) {}
};

}  // namespace fedchan
