#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fricsym {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed expression text. `offset()` is a byte offset into the input.
class ParseError : public Error {
public:
    ParseError(std::size_t offset, const std::string& what);
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// An expression references a variable the input matrix does not provide.
class ArityError : public Error {
public:
    ArityError(std::size_t index, std::size_t arity);
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

/// Input data or spec is unusable (bad CSV, bad generator spec, ...).
class DataError : public Error {
public:
    using Error::Error;
};

/// An optimizer or regression engine could not produce a result.
class FitError : public Error {
public:
    using Error::Error;
};

/// A model and a dataset disagree on features.
class ModelMismatch : public Error {
public:
    using Error::Error;
};

} // namespace fricsym
