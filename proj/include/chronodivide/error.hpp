#pragma once

#include <stdexcept>
#include <string>

namespace chronodivide {

/// Raised for any contract violation or I/O failure inside the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An Error tagged with the pipeline stage that produced it.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& message)
      : Error(stage + ": " + message), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace chronodivide
