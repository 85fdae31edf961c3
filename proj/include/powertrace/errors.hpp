#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace powertrace {

// Root of every error the library throws. The CLI maps the subclasses onto
// stable exit codes (config 2, data 3, numeric 4).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class ParseError : public DataError {
public:
    ParseError(std::size_t line, const std::string& what)
        : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ShapeError : public DataError {
public:
    using DataError::DataError;
};

class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace powertrace
