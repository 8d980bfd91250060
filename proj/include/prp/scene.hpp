#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "prp/geometry.hpp"

namespace prp {

/// Procedural surface texture. Colours are 0..255 per channel.
struct TextureSpec {
  enum class Kind { kChecker, kStripe, kNoise, kCheckerNoise };

  Kind kind = Kind::kCheckerNoise;
  double scale = 0.25;  // checker square side or stripe period, metres
  Vec3 color_a{225.0, 215.0, 200.0};
  Vec3 color_b{35.0, 45.0, 60.0};
  double noise_scale = 0.04;      // value-noise lattice spacing, metres
  double noise_amplitude = 0.45;  // blend weight of the noise layer in [0, 1]
  std::uint64_t seed = 1;
};

struct Primitive {
  enum class Kind { kPlane, kBox, kSphere };

  Kind kind = Kind::kPlane;
  Vec3 center = Vec3::Zero();
  /// Plane: half extents along axis_u and normal x axis_u (z unused).
  /// Box: axis-aligned half extents. Sphere: radius in x.
  Vec3 half_size = Vec3::Ones();
  Vec3 normal = Vec3::UnitZ();  // plane only
  Vec3 axis_u = Vec3::UnitX();  // plane only, orthogonal to normal
  int texture = 0;
};

struct SceneSpec {
  std::vector<Primitive> primitives;
  std::vector<TextureSpec> textures;
  Rgb8 background{0, 0, 0};

  /// Throws InvalidSpecError on an empty scene, non-positive extents or bad texture ids.
  void validate() const;
};

/// Small furnished room used by the CLI when no scene file is given.
SceneSpec default_scene();

void to_json(nlohmann::json& j, const SceneSpec& s);
void from_json(const nlohmann::json& j, SceneSpec& s);
SceneSpec load_scene(const std::string& path);

struct Hit {
  double distance = 0.0;  // along a unit direction
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::Zero();
  int primitive = -1;
};

/// Nearest intersection with distance > 1e-9. dir must be unit length.
std::optional<Hit> intersect(const SceneSpec& scene, const Vec3& origin, const Vec3& dir);
std::optional<Hit> intersect_primitive(const Primitive& prim, const Vec3& origin, const Vec3& dir);

/// Shaded colour of a surface hit.
Rgb8 shade(const SceneSpec& scene, const Hit& hit);

/// Unit world-frame direction of the ray through pixel (x, y).
Vec3 pixel_ray(double x, double y, const CameraIntrinsics& cam, const PoseSE3& pose);

/// Everything one pixel of render_view produces.
struct PixelSample {
  Rgb8 color;
  float depth = 0.0f;
  bool valid = false;
};
PixelSample render_pixel(const SceneSpec& scene, const CameraIntrinsics& cam, const PoseSE3& pose, int x, int y);

/// One ray per pixel centre, parallel over rows. Misses get the background colour and invalid depth.
RenderedView render_view(const SceneSpec& scene, const CameraIntrinsics& cam, const PoseSE3& pose,
                         int frame_index = 0);

struct TrajectorySpec {
  enum class Kind { kOrbit, kLine, kOrbitWithJitter };

  Kind kind = Kind::kOrbitWithJitter;
  Vec3 center = Vec3::Zero();  // look-at target
  double radius = 3.0;
  double height = 1.0;
  int frames = 200;
  double arc_deg = 360.0;    // orbit sweep; frame i sits at start + arc * i / frames
  double start_deg = 0.0;
  double jitter_deg = 0.0;   // per-frame rotation bound about the camera centre
  std::uint64_t seed = 7;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrajectorySpec& s);
void from_json(const nlohmann::json& j, TrajectorySpec& s);

/// Camera-to-world poses. Deterministic in spec (including seed).
std::vector<PoseSE3> generate_trajectory(const TrajectorySpec& spec);

/// Renders every pose of the trajectory.
std::vector<RenderedView> render_sequence(const SceneSpec& scene, const CameraIntrinsics& cam,
                                          const std::vector<PoseSE3>& poses);

}  // namespace prp
