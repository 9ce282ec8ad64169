#ifndef EDAAN_ERRORS_HPP_
#define EDAAN_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace edaan {

// Base class for every error raised by the library. The CLI maps each
// subclass to a distinct exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// A loss or gradient became NaN/Inf. `term()` names the offending quantity.
class NumericError : public Error {
 public:
  NumericError(std::string term, const std::string& what)
      : Error(what), term_(std::move(term)) {}
  const std::string& term() const { return term_; }

 private:
  std::string term_;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace edaan

#endif  // EDAAN_ERRORS_HPP_
