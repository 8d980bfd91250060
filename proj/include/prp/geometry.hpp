#pragma once

#include <Eigen/Core>
#include <cmath>
#include <optional>
#include <string_view>

#include "prp/grid.hpp"

namespace prp {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Pinhole calibration. Pixel centres sit at integer coordinates, so pixel (u, v)
/// covers [u - 0.5, u + 0.5) x [v - 0.5, v + 0.5).
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// Throws InvalidSpecError when fx, fy <= 0 or the principal point lies outside the image.
  void validate() const;

  Mat3 matrix() const;
  Mat3 inverse_matrix() const;

  /// Square pixels, principal point at (width/2, height/2).
  static CameraIntrinsics from_hfov(double hfov_deg, int width, int height);

  /// Same field of view at a different resolution.
  CameraIntrinsics scaled(double factor) const;

  bool in_bounds(const Vec2& p) const {
    return p.x() >= -0.5 && p.y() >= -0.5 && p.x() < width - 0.5 && p.y() < height - 0.5;
  }

  bool operator==(const CameraIntrinsics&) const = default;
};

/// Camera-to-world rigid transform: X_world = rotation * X_cam + translation.
struct PoseSE3 {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  /// Throws InvalidSpecError unless R^T R = I and det R = +1 within 1e-9.
  void validate() const;

  PoseSE3 inverse() const;
  /// (this * other) applies other first.
  PoseSE3 operator*(const PoseSE3& other) const;
  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  Mat4 matrix() const;
  static PoseSE3 from_matrix(const Mat4& m);

  /// Camera at eye looking at target; image y points away from up.
  static PoseSE3 look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ());
};

/// Euclidean ray distance per pixel plus a validity mask.
class DepthMap {
 public:
  DepthMap() = default;
  DepthMap(int width, int height) : values_(width, height, 0.0f), valid_(width, height, 0) {}

  int width() const { return values_.width(); }
  int height() const { return values_.height(); }

  bool valid(int x, int y) const { return valid_.contains(x, y) && valid_(x, y) != 0; }
  float at(int x, int y) const { return values_(x, y); }

  /// Non-positive or non-finite values are stored as invalid.
  void set(int x, int y, float d);
  void invalidate(int x, int y);

  const Grid<float>& values() const { return values_; }
  const Grid<std::uint8_t>& mask() const { return valid_; }

  bool operator==(const DepthMap&) const = default;

 private:
  Grid<float> values_;
  Grid<std::uint8_t> valid_;
};

/// Depth-window stabilisation for PrP.
struct PrPParams {
  double eps_d = 0.03;  // metres
  int window = 5;       // odd, pixels

  void validate() const;
};

/// One rendered RGB-D frame.
struct RenderedView {
  RgbImage image;
  DepthMap depth;
  CameraIntrinsics cam;
  PoseSE3 pose;
  int frame_index = 0;
};

struct Projection {
  Vec2 pixel;
  double z = 0.0;  // camera-frame depth in the destination camera
};

/// Lifts pixel p with ray distance d into world coordinates.
Vec3 backproject(const Vec2& p, double d, const CameraIntrinsics& cam, const PoseSE3& pose);

/// Throws BehindCameraError when the camera-frame z is <= 1e-9.
Projection project(const Vec3& point, const CameraIntrinsics& cam, const PoseSE3& pose);

/// z-depth <-> ray distance along the ray through pixel p.
double ray_to_z(double ray_distance, const Vec2& p, const CameraIntrinsics& cam);
double z_to_ray(double z, const Vec2& p, const CameraIntrinsics& cam);

/// Nearest integer pixel to p.
inline Eigen::Vector2i round_pixel(const Vec2& p) {
  return {static_cast<int>(std::lround(p.x())), static_cast<int>(std::lround(p.y()))};
}

/// Depth at p, or the window minimum when the window's depth spread exceeds eps_d.
/// The window is clipped at the image border. Throws InvalidDepthError when it holds no valid depth.
double robust_depth(const Vec2& p, const DepthMap& depth, const PrPParams& params);

/// Non-throwing robust_depth; nullopt where robust_depth would throw.
std::optional<double> try_robust_depth(const Vec2& p, const DepthMap& depth, const PrPParams& params);

enum class RejectReason : std::uint8_t {
  kNone = 0,
  kOutOfBounds = 1,
  kBehindCamera = 2,
  kOccluded = 3,
  kInvalidDepth = 4,
};

std::string_view to_string(RejectReason r);

struct ReprojectResult {
  Vec2 pixel = Vec2::Zero();
  RejectReason reason = RejectReason::kNone;
  bool ok() const { return reason == RejectReason::kNone; }
};

/// Point re-projection of pixel p from src into dst: robust depth, lift, project,
/// then bounds and depth-consistency checks against dst.
ReprojectResult reproject(const Vec2& p, const RenderedView& src, const RenderedView& dst,
                          const PrPParams& params);

}  // namespace prp
