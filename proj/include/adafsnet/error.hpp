#pragma once

#include <stdexcept>
#include <string>

namespace adafsnet {

// Error codes mirror the CLI exit codes: 1 usage, 2 data, 3 numeric.
class Error : public std::runtime_error {
public:
    Error(int code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    int code() const noexcept { return code_; }

private:
    int code_;
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& msg) : Error(1, msg) {}
};

// File I/O, parsing, and dataset structure problems.
class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(2, msg) {}
};

// Tensor shape contract violations.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(2, msg) {}
};

// Divergence, failed gradient checks, failed coverage certificates.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(3, msg) {}
};

}  // namespace adafsnet
