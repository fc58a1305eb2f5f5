#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gensafe {

using Vector = std::vector<double>;

// Error hierarchy. Every failure the library reports derives from Error so
// callers can catch one type at the stage boundary.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericDomainError : public Error {
 public:
  using Error::Error;
};

/// Input that admits no meaningful result (e.g. all points identical).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class VersionMismatch : public Error {
 public:
  using Error::Error;
};

class SchemaMismatch : public Error {
 public:
  using Error::Error;
};

/// Wraps an error raised inside a named pipeline stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

bool all_finite(std::span<const double> values);

/// Throws NumericDomainError naming `what` when any value is non-finite.
void require_finite(std::span<const double> values, const char* what);

/// SplitMix64 mix of (base, stream, index); used to derive independent
/// deterministic seeds for the RNG streams of a run.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                          std::uint64_t index = 0);

}  // namespace gensafe
