#pragma once

#include <stdexcept>
#include <string>

namespace gridwatch {

// Error kinds map onto CLI exit codes: usage -> 1, numeric -> 3,
// everything else (config/validation/parse/io/...) -> 2.
enum class ErrorKind {
    usage,
    config,
    shape,
    bounds,
    parse,
    validation,
    io,
    saturation,
    argument,
    numeric,
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

struct UsageError : Error {
    explicit UsageError(const std::string& m) : Error(ErrorKind::usage, m) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& m) : Error(ErrorKind::config, m) {}
};
struct ShapeError : Error {
    explicit ShapeError(const std::string& m) : Error(ErrorKind::shape, m) {}
};
struct BoundsError : Error {
    explicit BoundsError(const std::string& m) : Error(ErrorKind::bounds, m) {}
};
struct ParseError : Error {
    explicit ParseError(const std::string& m) : Error(ErrorKind::parse, m) {}
};
struct ValidationError : Error {
    explicit ValidationError(const std::string& m) : Error(ErrorKind::validation, m) {}
};
struct IoError : Error {
    explicit IoError(const std::string& m) : Error(ErrorKind::io, m) {}
};
struct SaturationError : Error {
    explicit SaturationError(const std::string& m) : Error(ErrorKind::saturation, m) {}
};
struct ArgumentError : Error {
    explicit ArgumentError(const std::string& m) : Error(ErrorKind::argument, m) {}
};
struct NumericError : Error {
    explicit NumericError(const std::string& m) : Error(ErrorKind::numeric, m) {}
};

}  // namespace gridwatch
