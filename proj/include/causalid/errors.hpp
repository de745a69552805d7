#pragma once

#include <stdexcept>
#include <string>

namespace causalid {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid arguments: unknown vertex, overlapping role sets, malformed query.
struct InputError : Error {
  explicit InputError(const std::string& msg) : Error(msg) {}
};

/// Text that does not conform to one of the file/expression grammars.
struct ParseError : Error {
  ParseError(const std::string& msg, int line_no = 0)
      : Error(line_no > 0 ? "line " + std::to_string(line_no) + ": " + msg : msg),
        line(line_no) {}
  int line;
};

/// Numeric evaluation failure (e.g. nonzero numerator over zero denominator).
struct EvalError : Error {
  explicit EvalError(const std::string& msg) : Error(msg) {}
};

/// An atom cannot be answered by any declared input distribution.
struct MissingInputError : Error {
  explicit MissingInputError(const std::string& msg) : Error(msg) {}
};

/// Plug-in estimation failure; carries a human-readable stratum description.
struct EstimationError : Error {
  EstimationError(const std::string& msg, const std::string& stratum_desc)
      : Error(msg + " [stratum " + stratum_desc + "]"), stratum(stratum_desc) {}
  std::string stratum;
};

}  // namespace causalid
