#pragma once

#include <stdexcept>
#include <string>

namespace qrgmm {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NonFinite : public Error {
 public:
  using Error::Error;
};

class InvalidM : public Error {
 public:
  using Error::Error;
};

class InvalidTau : public Error {
 public:
  using Error::Error;
};

class InvalidEps : public Error {
 public:
  using Error::Error;
};

// The design matrix does not have full column rank; the fit is not
// identified, so we refuse to return an arbitrary point of the optimal set.
class RankDeficient : public Error {
 public:
  using Error::Error;
};

class EmptySample : public Error {
 public:
  using Error::Error;
};

class SingletonSd : public Error {
 public:
  using Error::Error;
};

class MissingConditioner : public Error {
 public:
  using Error::Error;
};

class FormatVersionMismatch : public Error {
 public:
  using Error::Error;
};

class CorruptFile : public Error {
 public:
  using Error::Error;
};

// Precondition violations that have no dedicated class above.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace qrgmm
