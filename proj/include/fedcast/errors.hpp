#pragma once

#include <stdexcept>
#include <string>

namespace fedcast {

// Raised for malformed or inconsistent input data (CSV rows, config files,
// missing artifacts). The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when training or evaluation produces non-finite values.
// The CLI maps this to exit code 3.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace fedcast
