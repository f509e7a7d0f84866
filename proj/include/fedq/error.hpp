#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fedq {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Array shapes disagree (e.g. a QTable that does not match its MDP).
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A value violates a documented invariant: an MDP row that does not sum to
/// one, a parameter outside its range, a malformed config field.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Raised when a quantizer input exceeds the declared bound D. The algorithms
/// size D so this never happens; seeing it means the bound schedule is wrong.
class CompressorBoundError : public Error {
public:
    CompressorBoundError(std::size_t coordinate, double value, double bound,
                         const std::string& context = {});

    std::size_t coordinate() const noexcept { return coordinate_; }
    double value() const noexcept { return value_; }
    double bound() const noexcept { return bound_; }

private:
    std::size_t coordinate_;
    double value_;
    double bound_;
};

}  // namespace fedq
