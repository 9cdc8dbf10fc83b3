#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rotavg {

enum class ErrorCode {
  kInvalidArgument,
  kDegenerateProjection,
  kDuplicateEdge,
  kDimensionMismatch,
  kFactorization,
  kIterationLimit,
  kParse,
  kData,
  kEmptyDataset,
  kGeneration,
  kIo,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kDegenerateProjection: return "degenerate projection";
    case ErrorCode::kDuplicateEdge: return "duplicate edge";
    case ErrorCode::kDimensionMismatch: return "dimension mismatch";
    case ErrorCode::kFactorization: return "factorization failure";
    case ErrorCode::kIterationLimit: return "iteration limit";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kData: return "data error";
    case ErrorCode::kEmptyDataset: return "empty dataset";
    case ErrorCode::kGeneration: return "generation error";
    case ErrorCode::kIo: return "i/o error";
  }
  return "unknown error";
}

// Every failure raised by the library is an Error; code() tells them apart.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised when the eigensolver exhausts its restart budget.
class IterationLimitError : public Error {
 public:
  IterationLimitError(const std::string& what, std::vector<double> residuals)
      : Error(ErrorCode::kIterationLimit, what),
        best_residuals_(std::move(residuals)) {}

  const std::vector<double>& best_residuals() const noexcept {
    return best_residuals_;
  }

 private:
  std::vector<double> best_residuals_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorCode::kParse, "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace rotavg
