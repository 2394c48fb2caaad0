#pragma once

#include <stdexcept>
#include <string>

namespace amfuse {

// Error categories surfaced by the CLI as distinct exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class StreamError : public Error {
public:
    using Error::Error;
};

// Malformed input file content (CSV rows, PLY headers, calibration entries).
class ParseError : public Error {
public:
    using Error::Error;
};

}  // namespace amfuse
