#pragma once

#include "bitesim/common.hpp"
#include "bitesim/geometry.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace bitesim {

struct MouthFrame {
  Vec3 origin = Vec3::Zero();
  Vec3 normal = Vec3::UnitY();  // out of the mouth
  Vec3 up = Vec3::UnitZ();      // superior

  /// normal x up; the axis spoon pitch rotates about.
  Vec3 lateral() const { return normal.cross(up); }
  void validate() const;
};

/// Frame of the mesh's mouth annotation. Throws ValidationError if absent.
MouthFrame mouth_frame(const TetMesh& mesh);
MouthFrame mouth_frame(const HeadProxySpec& spec);

enum class Phase { approach, entry, close, open, retract_to_e, rotate_to_beta, exit };

const char* to_string(Phase phase);

struct BiteTransferParams {
  double entry_angle_deg = 90.0;
  double insertion_depth_m = 0.070;
  double exit_angle_deg = 90.0;
  double exit_depth_m = 0.010;
  double approach_distance_m = 0.050;
  double entry_speed = 0.05;        // m/s
  double exit_speed = 0.05;         // m/s
  double rotation_speed = 30.0;     // deg/s
  double jaw_close_duration = 0.5;  // s, also used to open the jaw
  double hold_duration = 0.3;       // s, jaw held closed
  double approach_hold = 0.5;       // s at the start pose while the jaw opens

  /// Throws ValidationError when a parameter is out of range.
  void validate() const;
};

inline constexpr double kMinSpoonAngleDeg = 60.0;
inline constexpr double kMaxSpoonAngleDeg = 130.0;

/// Unit spoon axis (toward the tip) for a pitch angle measured from -up in
/// the (normal, up) plane: 90 deg points along -normal.
Vec3 spoon_axis(const MouthFrame& frame, double angle_deg);

/// Spoon body orientation: +x along spoon_axis, +y along the frame's lateral
/// axis (bowl up, no roll).
Quat spoon_orientation(const MouthFrame& frame, double angle_deg);

/// Distance of a point behind the mouth plane, measured along -normal.
double tip_depth(const MouthFrame& frame, const Vec3& point);

struct Keyframe {
  double time = 0.0;
  Vec3 tip = Vec3::Zero();
  Quat orientation = Quat::Identity();
  double angle_deg = 0.0;
  Phase phase = Phase::approach;  // phase of the segment ending here
};

struct PhaseSchedule {
  std::vector<Keyframe> keys;
  double jaw_close_duration = 0.5;

  double end_time() const { return keys.empty() ? 0.0 : keys.back().time; }
};

/// Keyframes of the full bite transfer: start pose, approach hold, entry to
/// depth d along the alpha axis, jaw close and hold, jaw open, retract to
/// depth e, rotate about the tip to beta, and withdraw along the beta axis to
/// the approach distance. Zero-length segments are dropped.
PhaseSchedule keyframe_poses(const BiteTransferParams& params, const MouthFrame& frame);

struct ScheduledPose {
  Pose spoon;
  double angle_deg = 0.0;
  double jaw_openness = 1.0;  // 1 = fully open, 0 = closed
  Phase phase = Phase::approach;
};

/// Spoon pose and jaw command at time t: linear tip interpolation, constant
/// rate shortest-arc rotation. Throws ValidationError for t outside
/// [0, end_time].
ScheduledPose pose_at(const PhaseSchedule& schedule, double t);

/// Phase of the segment containing t; segments are (t_prev, t_key], the first
/// one also contains t = 0.
Phase phase_at(const PhaseSchedule& schedule, double t);

void write_schedule_dump(std::ostream& out, const PhaseSchedule& schedule);

}  // namespace bitesim
