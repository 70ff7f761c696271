#pragma once

#include <stdexcept>
#include <string>

namespace modewise {

// Error categories map one-to-one onto CLI exit codes (1 usage, 2 data, 3 numeric).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace modewise
