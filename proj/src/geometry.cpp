#include "prp/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>

namespace prp {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidSpecError("camera focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InvalidSpecError("camera dimensions must be positive");
  if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height))
    throw InvalidSpecError("principal point must lie inside the image");
}

Mat3 CameraIntrinsics::matrix() const {
  Mat3 k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Mat3 CameraIntrinsics::inverse_matrix() const {
  Mat3 k;
  k << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
  return k;
}

CameraIntrinsics CameraIntrinsics::from_hfov(double hfov_deg, int width, int height) {
  if (!(hfov_deg > 0.0 && hfov_deg < 180.0)) throw InvalidSpecError("field of view must be in (0, 180) degrees");
  const double f = 0.5 * width / std::tan(0.5 * hfov_deg * std::numbers::pi / 180.0);
  CameraIntrinsics cam{f, f, 0.5 * width, 0.5 * height, width, height};
  cam.validate();
  return cam;
}

CameraIntrinsics CameraIntrinsics::scaled(double factor) const {
  return {fx * factor, fy * factor, cx * factor, cy * factor,
          static_cast<int>(std::lround(width * factor)), static_cast<int>(std::lround(height * factor))};
}

void PoseSE3::validate() const {
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (!(ortho <= 1e-9)) throw InvalidSpecError("pose rotation is not orthonormal");
  if (!(std::abs(rotation.determinant() - 1.0) <= 1e-9)) throw InvalidSpecError("pose rotation has det != +1");
  if (!translation.allFinite()) throw InvalidSpecError("pose translation is not finite");
}

PoseSE3 PoseSE3::inverse() const {
  const Mat3 rt = rotation.transpose();
  return {rt, -rt * translation};
}

PoseSE3 PoseSE3::operator*(const PoseSE3& other) const {
  return {rotation * other.rotation, rotation * other.translation + translation};
}

Mat4 PoseSE3::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

PoseSE3 PoseSE3::from_matrix(const Mat4& m) {
  return {m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
}

PoseSE3 PoseSE3::look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 forward = target - eye;
  if (!(forward.norm() > 0.0)) throw InvalidSpecError("look_at: eye and target coincide");
  const Vec3 f = forward.normalized();
  const Vec3 side = f.cross(up);
  if (!(side.norm() > 1e-12)) throw InvalidSpecError("look_at: viewing direction is parallel to up");
  const Vec3 x = side.normalized();
  const Vec3 y = f.cross(x);
  PoseSE3 pose;
  pose.rotation.col(0) = x;
  pose.rotation.col(1) = y;
  pose.rotation.col(2) = f;
  pose.translation = eye;
  return pose;
}

void DepthMap::set(int x, int y, float d) {
  if (std::isfinite(d) && d > 0.0f) {
    values_(x, y) = d;
    valid_(x, y) = 1;
  } else {
    invalidate(x, y);
  }
}

void DepthMap::invalidate(int x, int y) {
  values_(x, y) = 0.0f;
  valid_(x, y) = 0;
}

void PrPParams::validate() const {
  if (!(eps_d > 0.0)) throw InvalidSpecError("eps_d must be positive");
  if (window < 1 || window % 2 == 0) throw InvalidSpecError("depth window must be odd and >= 1");
}

Vec3 backproject(const Vec2& p, double d, const CameraIntrinsics& cam, const PoseSE3& pose) {
  if (!std::isfinite(d) || !(d > 0.0)) throw InvalidDepthError("backproject: depth must be finite and positive");
  const Vec3 pc((p.x() - cam.cx) / cam.fx, (p.y() - cam.cy) / cam.fy, 1.0);
  return pose.rotation * (pc / pc.norm() * d) + pose.translation;
}

namespace {

std::optional<Projection> try_project(const Vec3& point, const CameraIntrinsics& cam, const PoseSE3& pose) {
  const Vec3 pc = pose.rotation.transpose() * (point - pose.translation);
  if (!(pc.z() > 1e-9)) return std::nullopt;
  return Projection{{cam.fx * pc.x() / pc.z() + cam.cx, cam.fy * pc.y() / pc.z() + cam.cy}, pc.z()};
}

}  // namespace

Projection project(const Vec3& point, const CameraIntrinsics& cam, const PoseSE3& pose) {
  if (!point.allFinite()) throw BehindCameraError("project: point is not finite");
  auto proj = try_project(point, cam, pose);
  if (!proj) throw BehindCameraError("project: point is behind the camera");
  return *proj;
}

double ray_to_z(double ray_distance, const Vec2& p, const CameraIntrinsics& cam) {
  const Vec3 pc((p.x() - cam.cx) / cam.fx, (p.y() - cam.cy) / cam.fy, 1.0);
  return ray_distance / pc.norm();
}

double z_to_ray(double z, const Vec2& p, const CameraIntrinsics& cam) {
  const Vec3 pc((p.x() - cam.cx) / cam.fx, (p.y() - cam.cy) / cam.fy, 1.0);
  return z * pc.norm();
}

std::optional<double> try_robust_depth(const Vec2& p, const DepthMap& depth, const PrPParams& params) {
  const Eigen::Vector2i c = round_pixel(p);
  if (c.x() < 0 || c.y() < 0 || c.x() >= depth.width() || c.y() >= depth.height()) return std::nullopt;
  const int r = params.window / 2;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  const int x0 = std::max(0, c.x() - r), x1 = std::min(depth.width() - 1, c.x() + r);
  const int y0 = std::max(0, c.y() - r), y1 = std::min(depth.height() - 1, c.y() + r);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (!depth.valid(x, y)) continue;
      const double d = depth.at(x, y);
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  }
  if (!(lo <= hi)) return std::nullopt;
  if (hi - lo <= params.eps_d && depth.valid(c.x(), c.y())) return depth.at(c.x(), c.y());
  return lo;
}

double robust_depth(const Vec2& p, const DepthMap& depth, const PrPParams& params) {
  auto d = try_robust_depth(p, depth, params);
  if (!d) throw InvalidDepthError("robust_depth: no valid depth in window");
  return *d;
}

std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::kNone: return "valid";
    case RejectReason::kOutOfBounds: return "out-of-bounds";
    case RejectReason::kBehindCamera: return "behind-camera";
    case RejectReason::kOccluded: return "occluded";
    case RejectReason::kInvalidDepth: return "invalid-depth";
  }
  return "unknown";
}

ReprojectResult reproject(const Vec2& p, const RenderedView& src, const RenderedView& dst,
                          const PrPParams& params) {
  const auto d = try_robust_depth(p, src.depth, params);
  if (!d) return {Vec2::Zero(), RejectReason::kInvalidDepth};
  const Vec3 world = backproject(p, *d, src.cam, src.pose);
  const Vec3 pc = dst.pose.rotation.transpose() * (world - dst.pose.translation);
  if (!(pc.z() > 1e-9)) return {Vec2::Zero(), RejectReason::kBehindCamera};
  const Vec2 q(dst.cam.fx * pc.x() / pc.z() + dst.cam.cx, dst.cam.fy * pc.y() / pc.z() + dst.cam.cy);
  if (!dst.cam.in_bounds(q)) return {q, RejectReason::kOutOfBounds};
  const auto dst_d = try_robust_depth(q, dst.depth, params);
  if (!dst_d) return {q, RejectReason::kInvalidDepth};
  if (pc.norm() - *dst_d > params.eps_d) return {q, RejectReason::kOccluded};
  return {q, RejectReason::kNone};
}

}  // namespace prp
