#include "verbgen/error.hpp"

namespace verbgen {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedXml: return "malformed XML";
    case ErrorCode::UnsupportedElement: return "unsupported element";
    case ErrorCode::UnsupportedGeometry: return "unsupported geometry";
    case ErrorCode::UnknownLink: return "unknown link";
    case ErrorCode::CyclicJointGraph: return "cyclic joint graph";
    case ErrorCode::MultipleRoots: return "multiple roots";
    case ErrorCode::MissingLimits: return "missing joint limits";
    case ErrorCode::InvalidModel: return "invalid model";
    case ErrorCode::UnknownCategory: return "unknown category";
    case ErrorCode::DimensionMismatch: return "dimension mismatch";
    case ErrorCode::InvalidImageSize: return "invalid image size";
    case ErrorCode::InvalidCamera: return "invalid camera";
    case ErrorCode::EmptySequence: return "empty sequence";
    case ErrorCode::UnknownVerb: return "unknown verb";
    case ErrorCode::VerbNotApplicable: return "verb not applicable";
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::Io: return "I/O error";
    case ErrorCode::ShapeMismatch: return "shape mismatch";
    case ErrorCode::NonFinite: return "non-finite value";
    case ErrorCode::BadMagic: return "bad magic";
    case ErrorCode::VersionMismatch: return "version mismatch";
    case ErrorCode::Truncated: return "truncated file";
    case ErrorCode::EmptyInput: return "empty input";
    case ErrorCode::DecompositionFailure: return "covariance decomposition failure";
    case ErrorCode::ObjectiveFailure: return "objective failure";
  }
  return "error";
}

}  // namespace verbgen
