#include "psc/errors.hpp"

namespace psc {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidMonomerCode: return "InvalidMonomerCode";
    case ErrorKind::SequenceTooLong: return "SequenceTooLong";
    case ErrorKind::UnknownToken: return "UnknownToken";
    case ErrorKind::MalformedXml: return "MalformedXml";
    case ErrorKind::GzipError: return "GzipError";
    case ErrorKind::InputUnreadable: return "InputUnreadable";
    case ErrorKind::OutputUnwritable: return "OutputUnwritable";
    case ErrorKind::LengthOutOfRange: return "LengthOutOfRange";
    case ErrorKind::TooFewPositives: return "TooFewPositives";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::IndexOutOfVocab: return "IndexOutOfVocab";
    case ErrorKind::InputTooShort: return "InputTooShort";
    case ErrorKind::StaleCache: return "StaleCache";
    case ErrorKind::VocabularyMismatch: return "VocabularyMismatch";
    case ErrorKind::BadCheckpoint: return "BadCheckpoint";
    case ErrorKind::BadConfig: return "BadConfig";
    case ErrorKind::BadTableFormat: return "BadTableFormat";
    case ErrorKind::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
  }
  return "Error";
}

}  // namespace psc
