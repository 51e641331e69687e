#pragma once

#include <stdexcept>
#include <string>

namespace danlab {

/// Error categories shared by the C++ core and the C boundary.
enum class ErrorKind {
    validation = 1,
    dimension,
    empty_input,
    contract,
    non_finite,
    io,
    load,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& what) : Error(ErrorKind::dimension, what) {}
};

class EmptyInputError : public Error {
public:
    explicit EmptyInputError(const std::string& what) : Error(ErrorKind::empty_input, what) {}
};

class ContractError : public Error {
public:
    explicit ContractError(const std::string& what) : Error(ErrorKind::contract, what) {}
};

class NonFiniteError : public Error {
public:
    explicit NonFiniteError(const std::string& what) : Error(ErrorKind::non_finite, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

class LoadError : public Error {
public:
    explicit LoadError(const std::string& what) : Error(ErrorKind::load, what) {}
};

}  // namespace danlab
