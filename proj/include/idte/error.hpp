#pragma once

#include <stdexcept>
#include <string>

namespace idte {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Operand shapes do not conform to the requested operation.
class DimensionError : public Error {
public:
    using Error::Error;
};

// NaN or Inf produced by an operation.
class NumericError : public Error {
public:
    using Error::Error;
};

// Caller violated a documented precondition.
class ContractError : public Error {
public:
    using Error::Error;
};

// Input data failed validation (e.g. an unlabeled training record).
class ValidationError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace idte
