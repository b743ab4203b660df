#ifndef SYNFLOW_ERROR_HPP_
#define SYNFLOW_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace synflow {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (embedding files, corpora, checkpoints). Carries the
// 1-based line number when one applies, 0 otherwise.
class ParseError : public Error {
 public:
  ParseError(const std::string &what, std::size_t line = 0)
      : Error(line == 0 ? what : what + " at line " + std::to_string(line)),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Shapes or dimensions that do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A computation produced a non-finite value or an impossible observation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// A checkpoint file that is truncated, of another version, or otherwise does
// not follow the schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// A checkpoint or model of the wrong structure (Markov vs DMV) was supplied.
class StructureMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace synflow

#endif  // SYNFLOW_ERROR_HPP_
