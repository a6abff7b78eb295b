#pragma once

#include <stdexcept>
#include <string>

namespace labelshift {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input or configuration. CLI exit code 1.
class UsageError : public Error {
public:
    using Error::Error;
};

// Singular systems, support violations, solver non-convergence. CLI exit code 2.
class NumericalError : public Error {
public:
    using Error::Error;
};

class SupportError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace labelshift
