#pragma once

#include <stdexcept>
#include <string>

namespace forchestra {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor shapes do not conform.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration or argument value.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed input file.
class ParseError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// A caller broke a documented precondition (non-scalar loss, bad weights, ...).
class ContractError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class TrainingError : public Error {
public:
    TrainingError(const std::string& what, std::size_t step)
        : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Hold-out instances overlap the training set recorded in a manifest.
class LeakError : public Error {
public:
    using Error::Error;
};

/// Forecasts do not cover every requested instance/period.
class CoverageError : public Error {
public:
    using Error::Error;
};

}  // namespace forchestra
