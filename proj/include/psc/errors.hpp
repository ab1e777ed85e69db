#pragma once

#include <stdexcept>
#include <string>

namespace psc {

enum class ErrorKind {
  // data / input errors -> exit status 2
  InvalidMonomerCode,
  SequenceTooLong,
  UnknownToken,
  MalformedXml,
  GzipError,
  InputUnreadable,
  OutputUnwritable,
  LengthOutOfRange,
  TooFewPositives,
  ShapeMismatch,
  IndexOutOfVocab,
  InputTooShort,
  StaleCache,
  VocabularyMismatch,
  BadCheckpoint,
  BadConfig,
  BadTableFormat,
  // numeric errors -> exit status 3
  NonFiniteGradient,
  NonFiniteLoss,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// CLI exit status: 2 for data errors, 3 for numeric errors.
  int exit_status() const noexcept {
    return (kind_ == ErrorKind::NonFiniteGradient || kind_ == ErrorKind::NonFiniteLoss) ? 3 : 2;
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace psc
