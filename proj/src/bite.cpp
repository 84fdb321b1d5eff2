#include "bitesim/bite.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace bitesim {

namespace {

constexpr double kPi = 3.14159265358979323846;

double radians(double deg) { return deg * kPi / 180.0; }

}  // namespace

void MouthFrame::validate() const {
  if (std::abs(normal.norm() - 1.0) > 1e-9 || std::abs(up.norm() - 1.0) > 1e-9 ||
      std::abs(normal.dot(up)) > 1e-9) {
    throw ValidationError("mouth frame axes must be orthonormal");
  }
}

MouthFrame mouth_frame(const TetMesh& mesh) {
  if (!mesh.mouth) throw ValidationError("mesh has no mouth annotation");
  MouthFrame f{mesh.mouth->origin, mesh.mouth->normal, mesh.mouth->up};
  f.validate();
  return f;
}

MouthFrame mouth_frame(const HeadProxySpec& spec) {
  return {spec.mouth_slit.center, Vec3::UnitY(), Vec3::UnitZ()};
}

const char* to_string(Phase phase) {
  switch (phase) {
    case Phase::approach: return "approach";
    case Phase::entry: return "entry";
    case Phase::close: return "close";
    case Phase::open: return "open";
    case Phase::retract_to_e: return "retract_to_e";
    case Phase::rotate_to_beta: return "rotate_to_beta";
    case Phase::exit: return "exit";
  }
  return "unknown";
}

void BiteTransferParams::validate() const {
  auto angle_ok = [](double a) { return a >= kMinSpoonAngleDeg && a <= kMaxSpoonAngleDeg; };
  if (!angle_ok(entry_angle_deg) || !angle_ok(exit_angle_deg)) {
    throw ValidationError("spoon angles must lie in [60, 130] degrees");
  }
  if (!(exit_depth_m >= 0.0) || !(exit_depth_m <= insertion_depth_m)) {
    throw ValidationError("exit depth must satisfy 0 <= e <= d");
  }
  if (!(approach_distance_m > 0.0)) throw ValidationError("approach distance must be positive");
  if (!(entry_speed > 0.0) || !(exit_speed > 0.0) || !(rotation_speed > 0.0)) {
    throw ValidationError("speeds must be positive");
  }
  if (!(jaw_close_duration > 0.0) || !(hold_duration >= 0.0) || !(approach_hold >= 0.0)) {
    throw ValidationError("durations must be non-negative (jaw_close_duration positive)");
  }
}

Vec3 spoon_axis(const MouthFrame& frame, double angle_deg) {
  const double a = radians(angle_deg);
  return -std::cos(a) * frame.up - std::sin(a) * frame.normal;
}

Quat spoon_orientation(const MouthFrame& frame, double angle_deg) {
  Mat3 r;
  const Vec3 x = spoon_axis(frame, angle_deg);
  const Vec3 y = frame.lateral();
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = x.cross(y);
  return Quat(r).normalized();
}

double tip_depth(const MouthFrame& frame, const Vec3& point) { return -(point - frame.origin).dot(frame.normal); }

PhaseSchedule keyframe_poses(const BiteTransferParams& params, const MouthFrame& frame) {
  params.validate();
  frame.validate();
  PhaseSchedule s;
  s.jaw_close_duration = params.jaw_close_duration;

  const double alpha = params.entry_angle_deg;
  const double beta = params.exit_angle_deg;
  const double approach = params.approach_distance_m;
  const Vec3 w_alpha = spoon_axis(frame, alpha);
  const Vec3 w_beta = spoon_axis(frame, beta);
  const double sin_alpha = std::sin(radians(alpha));
  const double sin_beta = std::sin(radians(beta));

  double t = 0.0;
  auto push = [&](double duration, const Vec3& tip, double angle, Phase phase) {
    if (!s.keys.empty() && !(duration > 0.0)) return;  // merge zero-length segments
    t += duration;
    s.keys.push_back({t, tip, spoon_orientation(frame, angle), angle, phase});
  };

  const Vec3 start = frame.origin + approach * frame.normal;
  push(0.0, start, alpha, Phase::approach);
  push(params.approach_hold, start, alpha, Phase::approach);

  // Along the alpha axis, depth grows at sin(alpha) per unit length.
  const double entry_len = (approach + params.insertion_depth_m) / sin_alpha;
  const Vec3 entry_end = start + entry_len * w_alpha;
  push(entry_len / params.entry_speed, entry_end, alpha, Phase::entry);
  push(params.jaw_close_duration + params.hold_duration, entry_end, alpha, Phase::close);
  push(params.jaw_close_duration, entry_end, alpha, Phase::open);

  const double retract_len = (params.insertion_depth_m - params.exit_depth_m) / sin_alpha;
  const Vec3 retract_end = entry_end - retract_len * w_alpha;
  push(retract_len / params.exit_speed, retract_end, alpha, Phase::retract_to_e);
  push(std::abs(beta - alpha) / params.rotation_speed, retract_end, beta, Phase::rotate_to_beta);

  const double exit_len = (params.exit_depth_m + approach) / sin_beta;
  push(exit_len / params.exit_speed, retract_end - exit_len * w_beta, beta, Phase::exit);
  return s;
}

namespace {

// Index k >= 1 of the segment (t_{k-1}, t_k] containing t.
std::size_t segment_index(const PhaseSchedule& s, double t) {
  if (s.keys.size() < 2) throw ValidationError("schedule needs at least two keyframes");
  if (!(t >= 0.0 && t <= s.end_time())) {
    throw ValidationError("time " + fmt9(t) + " outside schedule [0, " + fmt9(s.end_time()) + "]");
  }
  const auto it = std::lower_bound(s.keys.begin() + 1, s.keys.end(), t,
                                   [](const Keyframe& k, double value) { return k.time < value; });
  return static_cast<std::size_t>(it - s.keys.begin());
}

}  // namespace

Phase phase_at(const PhaseSchedule& schedule, double t) { return schedule.keys[segment_index(schedule, t)].phase; }

ScheduledPose pose_at(const PhaseSchedule& schedule, double t) {
  const std::size_t k = segment_index(schedule, t);
  const Keyframe& a = schedule.keys[k - 1];
  const Keyframe& b = schedule.keys[k];
  ScheduledPose out;
  out.phase = b.phase;
  if (t == b.time) {
    out.spoon = {b.tip, b.orientation};
    out.angle_deg = b.angle_deg;
  } else if (t == a.time) {
    out.spoon = {a.tip, a.orientation};
    out.angle_deg = a.angle_deg;
  } else {
    const double u = (t - a.time) / (b.time - a.time);
    out.spoon.translation = a.tip + u * (b.tip - a.tip);
    out.spoon.rotation = a.orientation.slerp(u, b.orientation).normalized();
    out.angle_deg = a.angle_deg + u * (b.angle_deg - a.angle_deg);
  }

  const double ramp = schedule.jaw_close_duration;
  switch (b.phase) {
    case Phase::approach:
    case Phase::entry: out.jaw_openness = std::min(1.0, t / ramp); break;
    case Phase::close: out.jaw_openness = std::max(0.0, 1.0 - (t - a.time) / ramp); break;
    case Phase::open: out.jaw_openness = std::min(1.0, (t - a.time) / ramp); break;
    default: out.jaw_openness = 1.0; break;
  }
  return out;
}

void write_schedule_dump(std::ostream& out, const PhaseSchedule& schedule) {
  for (const Keyframe& k : schedule.keys) {
    out << "key t=" << fmt9(k.time) << " phase=" << to_string(k.phase) << " tip=" << fmt9(k.tip.x()) << ','
        << fmt9(k.tip.y()) << ',' << fmt9(k.tip.z()) << " angle_deg=" << fmt9(k.angle_deg) << '\n';
  }
}

}  // namespace bitesim
