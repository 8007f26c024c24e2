#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mocap {

enum class ErrorCode {
  invalid_argument,
  point_at_infinity,
  insufficient_points,
  degenerate_configuration,
  singular_left_block,
  inconsistent_landmark,
  numerical_degeneracy,
  frame_index_mismatch,
  empty_sequence,
  all_gaps,
  too_short,
  nyquist_violation,
  missing_defining_landmark,
  model_artifact_missing,
  window_too_long,
  unknown_landmark,
  no_intersection,
  open_loop,
  not_watertight,
  non_positive_input,
  no_valid_frame,
  unobservable,
  subject_out_of_view,
  malformed_document,
  inconsistent_landmark_count,
  ragged_trajectories,
  io,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::point_at_infinity: return "PointAtInfinity";
    case ErrorCode::insufficient_points: return "InsufficientPoints";
    case ErrorCode::degenerate_configuration: return "DegenerateConfiguration";
    case ErrorCode::singular_left_block: return "SingularLeftBlock";
    case ErrorCode::inconsistent_landmark: return "InconsistentLandmark";
    case ErrorCode::numerical_degeneracy: return "NumericalDegeneracy";
    case ErrorCode::frame_index_mismatch: return "FrameIndexMismatch";
    case ErrorCode::empty_sequence: return "EmptySequence";
    case ErrorCode::all_gaps: return "AllGaps";
    case ErrorCode::too_short: return "TooShort";
    case ErrorCode::nyquist_violation: return "NyquistViolation";
    case ErrorCode::missing_defining_landmark: return "MissingDefiningLandmark";
    case ErrorCode::model_artifact_missing: return "ModelArtifactMissing";
    case ErrorCode::window_too_long: return "WindowTooLong";
    case ErrorCode::unknown_landmark: return "UnknownLandmark";
    case ErrorCode::no_intersection: return "NoIntersection";
    case ErrorCode::open_loop: return "OpenLoop";
    case ErrorCode::not_watertight: return "NotWatertight";
    case ErrorCode::non_positive_input: return "NonPositiveInput";
    case ErrorCode::no_valid_frame: return "NoValidFrame";
    case ErrorCode::unobservable: return "Unobservable";
    case ErrorCode::subject_out_of_view: return "SubjectOutOfView";
    case ErrorCode::malformed_document: return "MalformedDocument";
    case ErrorCode::inconsistent_landmark_count: return "InconsistentLandmarkCount";
    case ErrorCode::ragged_trajectories: return "RaggedTrajectories";
    case ErrorCode::io: return "IoError";
  }
  return "Unknown";
}

// Every failure raised by the library. `module()` names the stage that failed
// so the CLI can print module-qualified messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string module, const std::string& message)
      : std::runtime_error(module + ": " + std::string(to_string(code)) + ": " + message),
        code_(code),
        module_(std::move(module)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorCode code_;
  std::string module_;
};

}  // namespace mocap
