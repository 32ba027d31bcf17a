#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lidaf {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Precondition violated by the caller (bad count, range, shape).
class ArgumentError : public Error {
public:
    using Error::Error;
};

// Iterative method failed to converge or produced non-finite values.
class NumericalError : public Error {
public:
    using Error::Error;
};

// Value outside the mathematical domain of a transform (e.g. Box-Cox on x <= 0).
class DomainError : public Error {
public:
    using Error::Error;
};

// Input is structurally valid but carries no usable signal
// (zero-variance block, zero events, every feature removed).
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

// Sample identifiers disagree between inputs that must be aligned.
class AlignmentError : public Error {
public:
    AlignmentError(const std::string& what, std::vector<std::string> offending)
        : Error(what), offending_(std::move(offending)) {}

    const std::vector<std::string>& offending_ids() const { return offending_; }

private:
    std::vector<std::string> offending_;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace lidaf
