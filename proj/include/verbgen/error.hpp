#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace verbgen {

enum class ErrorCode {
  // URDF ingestion
  MalformedXml,
  UnsupportedElement,
  UnsupportedGeometry,
  UnknownLink,
  CyclicJointGraph,
  MultipleRoots,
  MissingLimits,
  InvalidModel,
  // procedural generation
  UnknownCategory,
  // kinematics / state handling
  DimensionMismatch,
  // rendering
  InvalidImageSize,
  InvalidCamera,
  EmptySequence,
  // verbs and datasets
  UnknownVerb,
  VerbNotApplicable,
  InvalidArgument,
  Io,
  // neural network
  ShapeMismatch,
  NonFinite,
  BadMagic,
  VersionMismatch,
  Truncated,
  EmptyInput,
  // optimizer
  DecompositionFailure,
  ObjectiveFailure,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-checkable code alongside the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace verbgen
