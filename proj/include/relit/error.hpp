#pragma once

#include <stdexcept>
#include <string>

namespace relit {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid argument or violated precondition.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// File could not be read, written or parsed.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace relit
