#pragma once

#include <stdexcept>
#include <string>

namespace mim {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes disagree with an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A computation produced NaN or Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed or unreadable input files.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Arguments outside an operation's domain (degenerate boxes, bad config, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

#define MIM_CHECK(cond, ExcType, msg)         \
  do {                                        \
    if (!(cond)) throw ExcType(std::string(msg)); \
  } while (0)

}  // namespace mim
