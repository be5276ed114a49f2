#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dan {

/// Malformed input: wrong lengths, probabilities off the simplex, bad shapes.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The prediction-reward margin lies outside the range the tangent bound covers.
class ApplicabilityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An observation with zero likelihood under the current belief.
class ImpossibleObservationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stepping an episode that has already ended.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Brute-force enumeration guard exceeded.
class SizeError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// All particle weights vanished.
class DegeneracyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values reached the optimizer.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class IdxErrorCode { kIo = 1, kBadMagic = 2, kTruncated = 3, kCountMismatch = 4 };

const char* to_string(IdxErrorCode code);

/// IDX parse failure carrying the byte offset at which it was detected.
class IdxFormatError : public std::runtime_error {
 public:
  IdxFormatError(IdxErrorCode code, std::size_t offset, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + " at byte offset " +
                           std::to_string(offset) + ": " + what),
        code_(code),
        offset_(offset) {}

  IdxErrorCode code() const noexcept { return code_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  IdxErrorCode code_;
  std::size_t offset_;
};

}  // namespace dan
