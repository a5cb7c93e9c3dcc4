#pragma once

#include <stdexcept>
#include <string>

namespace ddpnas {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad user input: malformed config, spec arguments, file contents.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A broken library invariant or a failure while a search is running.
class RuntimeError : public Error {
public:
    using Error::Error;
};

}  // namespace ddpnas
