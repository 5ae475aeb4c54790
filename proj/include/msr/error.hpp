#pragma once

#include <stdexcept>
#include <string>

namespace msr {

/// Process exit codes used by the command-line tool.
enum class ExitCode : int { ok = 0, usage = 2, data = 3, numerical = 4 };

/// Base of all library errors; carries the exit code the CLI maps it to.
class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ExitCode::usage, what) {}
};

/// Malformed input files, schema mismatches, violated record invariants.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ExitCode::data, what) {}
};

/// Temperature outside the thermochemical table.
class RangeError : public Error {
 public:
  explicit RangeError(const std::string& what) : Error(ExitCode::data, what) {}
};

/// Solver non-convergence, non-finite losses, model inconsistencies.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ExitCode::numerical, what) {}
};

}  // namespace msr
