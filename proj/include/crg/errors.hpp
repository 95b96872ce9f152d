#pragma once

#include <stdexcept>
#include <string>

namespace crg {

// Root of every error the library throws. The CLI maps the three families
// (config, data, runtime) onto distinct exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Data family: malformed inputs, geometry, I/O.
class DataError : public Error {
public:
    using Error::Error;
};

class ShapeError : public DataError {
public:
    using DataError::DataError;
};

class GeometryError : public DataError {
public:
    using DataError::DataError;
};

class CoverageError : public DataError {
public:
    using DataError::DataError;
};

class FormatError : public DataError {
public:
    using DataError::DataError;
};

class DatasetError : public DataError {
public:
    using DataError::DataError;
};

class EmptySupervisionError : public DataError {
public:
    using DataError::DataError;
};

// Runtime family: numeric failures and violated call contracts.
class RuntimeError : public Error {
public:
    using Error::Error;
};

class DomainError : public RuntimeError {
public:
    using RuntimeError::RuntimeError;
};

class ContractError : public RuntimeError {
public:
    using RuntimeError::RuntimeError;
};

class ScheduleError : public RuntimeError {
public:
    using RuntimeError::RuntimeError;
};

class DivergenceError : public RuntimeError {
public:
    using RuntimeError::RuntimeError;
};

class GenerationError : public RuntimeError {
public:
    using RuntimeError::RuntimeError;
};

}  // namespace crg
