#pragma once

#include <stdexcept>
#include <string>

namespace egobridge {

// Base of everything the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad or inconsistent input data (files, shapes, ids). CLI exit code 2.
class DataError : public Error {
 public:
  using Error::Error;
};

// A computation produced an unusable number. CLI exit code 3.
class NumericError : public Error {
 public:
  using Error::Error;
};

#define EGOBRIDGE_ERROR(Name, Base)   \
  class Name : public Base {          \
   public:                            \
    using Base::Base;                 \
  };

EGOBRIDGE_ERROR(SchemaError, DataError)
EGOBRIDGE_ERROR(InvalidModel, DataError)
EGOBRIDGE_ERROR(ShapeMismatch, DataError)
EGOBRIDGE_ERROR(EmptyDataset, DataError)
EGOBRIDGE_ERROR(UnknownInstruction, DataError)
EGOBRIDGE_ERROR(NonMonotonicTick, DataError)
EGOBRIDGE_ERROR(NoCoverage, DataError)
EGOBRIDGE_ERROR(UnknownConditionKind, DataError)
EGOBRIDGE_ERROR(MissingEntity, DataError)
EGOBRIDGE_ERROR(EmptyLog, DataError)
EGOBRIDGE_ERROR(EmptyInput, DataError)

EGOBRIDGE_ERROR(DegenerateInput, NumericError)
EGOBRIDGE_ERROR(NonFinite, NumericError)

#undef EGOBRIDGE_ERROR

// Timestamps that fail to increase; carries the offending frame index.
class NonMonotonicTime : public DataError {
 public:
  NonMonotonicTime(std::size_t index, const std::string& what)
      : DataError(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

}  // namespace egobridge
