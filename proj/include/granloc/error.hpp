/*
Copyright 2026 The granloc Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace granloc {

enum class Errc {
  InvalidArgument,
  // taxonomy
  CycleDetected,
  MultipleParents,
  MultipleRoots,
  DuplicateEdge,
  UnknownNode,
  InvalidCoarsening,
  CyclicInput,
  EmptyResult,
  InconsistentHierarchy,
  DepthOutOfRange,
  // score maps
  NonFiniteValue,
  NotNormalized,
  DimensionMismatch,
  InvalidBox,
  BoxOutOfBounds,
  // evaluation / aggregation
  EmptySampleSet,
  EmptyInput,
  MissingScoreMap,
  CorruptScoreMap,
  MissingSiblingCam,
  // data io
  ParseError,
  UnknownLabel,
  DuplicateImageId,
  MissingDimensions,
  IoError,
};

constexpr std::string_view errc_name(Errc c) {
  switch (c) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::CycleDetected: return "CycleDetected";
    case Errc::MultipleParents: return "MultipleParents";
    case Errc::MultipleRoots: return "MultipleRoots";
    case Errc::DuplicateEdge: return "DuplicateEdge";
    case Errc::UnknownNode: return "UnknownNode";
    case Errc::InvalidCoarsening: return "InvalidCoarsening";
    case Errc::CyclicInput: return "CyclicInput";
    case Errc::EmptyResult: return "EmptyResult";
    case Errc::InconsistentHierarchy: return "InconsistentHierarchy";
    case Errc::DepthOutOfRange: return "DepthOutOfRange";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::NotNormalized: return "NotNormalized";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::InvalidBox: return "InvalidBox";
    case Errc::BoxOutOfBounds: return "BoxOutOfBounds";
    case Errc::EmptySampleSet: return "EmptySampleSet";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::MissingScoreMap: return "MissingScoreMap";
    case Errc::CorruptScoreMap: return "CorruptScoreMap";
    case Errc::MissingSiblingCam: return "MissingSiblingCam";
    case Errc::ParseError: return "ParseError";
    case Errc::UnknownLabel: return "UnknownLabel";
    case Errc::DuplicateImageId: return "DuplicateImageId";
    case Errc::MissingDimensions: return "MissingDimensions";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library. `subject()` carries the offending
/// node name, record id or path when there is one.
class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string subject, const std::string& detail = {})
      : std::runtime_error(format(code, subject, detail)),
        code_(code),
        subject_(std::move(subject)) {}

  Errc code() const noexcept { return code_; }
  const std::string& subject() const noexcept { return subject_; }

 private:
  static std::string format(Errc code, const std::string& subject,
                            const std::string& detail) {
    std::string msg(errc_name(code));
    if (!subject.empty()) msg += ": " + subject;
    if (!detail.empty()) msg += " (" + detail + ")";
    return msg;
  }

  Errc code_;
  std::string subject_;
};

}  // namespace granloc
