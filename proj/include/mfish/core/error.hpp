#pragma once

#include <stdexcept>
#include <string>

namespace mfish {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A value violates a documented invariant (bad label code, bad config, shape mismatch).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// File system or decoding failure.
class IoError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    using Error::Error;
};

} // namespace mfish
