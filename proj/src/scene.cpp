#include "prp/scene.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

namespace prp {

namespace {

constexpr double kMinHitDistance = 1e-9;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double lattice_value(std::int64_t ix, std::int64_t iy, std::int64_t iz, std::uint64_t seed) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(ix));
  h = splitmix64(h ^ static_cast<std::uint64_t>(iy));
  h = splitmix64(h ^ static_cast<std::uint64_t>(iz));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise(const Vec3& p, std::uint64_t seed) {
  const double fx = std::floor(p.x()), fy = std::floor(p.y()), fz = std::floor(p.z());
  const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy),
             iz = static_cast<std::int64_t>(fz);
  const double tx = smooth(p.x() - fx), ty = smooth(p.y() - fy), tz = smooth(p.z() - fz);
  double acc = 0.0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const double w = (dx ? tx : 1.0 - tx) * (dy ? ty : 1.0 - ty) * (dz ? tz : 1.0 - tz);
        acc += w * lattice_value(ix + dx, iy + dy, iz + dz, seed);
      }
  return acc;
}

int parity(double v) { return static_cast<int>(static_cast<std::int64_t>(std::floor(v)) & 1); }

Vec3 texture_color(const TextureSpec& tex, const Vec3& local) {
  const auto noise = [&] {
    const Vec3 q = local / tex.noise_scale;
    return 0.65 * value_noise(q, tex.seed) + 0.35 * value_noise(2.03 * q, tex.seed + 1);
  };
  const auto checker = [&] {
    const int k = parity(local.x() / tex.scale) ^ parity(local.y() / tex.scale) ^ parity(local.z() / tex.scale);
    return k ? tex.color_a : tex.color_b;
  };
  switch (tex.kind) {
    case TextureSpec::Kind::kChecker:
      return checker();
    case TextureSpec::Kind::kStripe:
      return parity(local.x() / tex.scale) ? tex.color_a : tex.color_b;
    case TextureSpec::Kind::kNoise: {
      const double n = noise();
      return tex.color_b + n * (tex.color_a - tex.color_b);
    }
    case TextureSpec::Kind::kCheckerNoise: {
      const double n = noise();
      return (1.0 - tex.noise_amplitude) * checker() + tex.noise_amplitude * (tex.color_b + n * (tex.color_a - tex.color_b));
    }
  }
  return tex.color_a;
}

/// Texture coordinates: in-plane for planes and box faces, solid for spheres.
Vec3 local_coordinates(const Primitive& prim, const Vec3& point) {
  const Vec3 rel = point - prim.center;
  switch (prim.kind) {
    case Primitive::Kind::kPlane: {
      const Vec3 v = prim.normal.cross(prim.axis_u);
      return {rel.dot(prim.axis_u), rel.dot(v), 0.0};
    }
    case Primitive::Kind::kBox: {
      int face = 0;
      double best = -1.0;
      for (int a = 0; a < 3; ++a) {
        const double r = std::abs(rel[a]) / prim.half_size[a];
        if (r > best) {
          best = r;
          face = a;
        }
      }
      const int a0 = (face + 1) % 3, a1 = (face + 2) % 3;
      // Faces on opposite sides get distinct patterns.
      const double shift = rel[face] > 0.0 ? 0.0 : 17.0;
      return {rel[a0] + shift, rel[a1] + shift, 0.0};
    }
    case Primitive::Kind::kSphere:
      return rel;
  }
  return rel;
}

const char* kind_name(TextureSpec::Kind k) {
  switch (k) {
    case TextureSpec::Kind::kChecker: return "checker";
    case TextureSpec::Kind::kStripe: return "stripe";
    case TextureSpec::Kind::kNoise: return "noise";
    case TextureSpec::Kind::kCheckerNoise: return "checker-noise";
  }
  return "checker-noise";
}

const char* kind_name(Primitive::Kind k) {
  switch (k) {
    case Primitive::Kind::kPlane: return "plane";
    case Primitive::Kind::kBox: return "box";
    case Primitive::Kind::kSphere: return "sphere";
  }
  return "plane";
}

const char* kind_name(TrajectorySpec::Kind k) {
  switch (k) {
    case TrajectorySpec::Kind::kOrbit: return "orbit";
    case TrajectorySpec::Kind::kLine: return "line";
    case TrajectorySpec::Kind::kOrbitWithJitter: return "orbit-with-jitter";
  }
  return "orbit";
}

nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

Vec3 json_vec(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw InvalidSpecError("expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

void SceneSpec::validate() const {
  if (primitives.empty()) throw InvalidSpecError("scene has no primitives");
  for (const auto& p : primitives) {
    if (p.texture < 0 || p.texture >= static_cast<int>(textures.size()))
      throw InvalidSpecError("primitive references a missing texture");
    switch (p.kind) {
      case Primitive::Kind::kPlane:
        if (!(p.half_size.x() > 0.0 && p.half_size.y() > 0.0)) throw InvalidSpecError("plane extents must be positive");
        if (std::abs(p.normal.norm() - 1.0) > 1e-9 || std::abs(p.axis_u.norm() - 1.0) > 1e-9 ||
            std::abs(p.normal.dot(p.axis_u)) > 1e-9)
          throw InvalidSpecError("plane normal and axis_u must be orthonormal");
        break;
      case Primitive::Kind::kBox:
        if (!(p.half_size.minCoeff() > 0.0)) throw InvalidSpecError("box extents must be positive");
        break;
      case Primitive::Kind::kSphere:
        if (!(p.half_size.x() > 0.0)) throw InvalidSpecError("sphere radius must be positive");
        break;
    }
  }
  for (const auto& t : textures) {
    if (!(t.scale > 0.0) || !(t.noise_scale > 0.0)) throw InvalidSpecError("texture scales must be positive");
  }
}

SceneSpec default_scene() {
  SceneSpec s;
  s.background = {0, 0, 0};
  TextureSpec floor;
  floor.scale = 0.3;
  floor.seed = 11;
  TextureSpec crate;
  crate.kind = TextureSpec::Kind::kCheckerNoise;
  crate.scale = 0.12;
  crate.color_a = {240.0, 190.0, 90.0};
  crate.color_b = {60.0, 30.0, 20.0};
  crate.noise_amplitude = 0.5;
  crate.seed = 23;
  TextureSpec marble;
  marble.kind = TextureSpec::Kind::kNoise;
  marble.noise_scale = 0.03;
  marble.color_a = {250.0, 250.0, 245.0};
  marble.color_b = {20.0, 60.0, 110.0};
  marble.seed = 37;
  TextureSpec poster;
  poster.kind = TextureSpec::Kind::kCheckerNoise;
  poster.scale = 0.18;
  poster.color_a = {200.0, 230.0, 200.0};
  poster.color_b = {90.0, 20.0, 70.0};
  poster.noise_amplitude = 0.55;
  poster.seed = 41;
  s.textures = {floor, crate, marble, poster};

  Primitive ground;
  ground.kind = Primitive::Kind::kPlane;
  ground.center = {0.0, 0.0, 0.0};
  ground.half_size = {5.0, 5.0, 0.0};
  ground.texture = 0;
  Primitive backdrop;
  backdrop.kind = Primitive::Kind::kPlane;
  backdrop.center = {0.0, 1.6, 1.0};
  backdrop.normal = {0.0, -1.0, 0.0};
  backdrop.axis_u = {1.0, 0.0, 0.0};
  backdrop.half_size = {2.5, 1.0, 0.0};
  backdrop.texture = 3;
  Primitive box_a;
  box_a.kind = Primitive::Kind::kBox;
  box_a.center = {0.45, 0.15, 0.3};
  box_a.half_size = {0.3, 0.25, 0.3};
  box_a.texture = 1;
  Primitive box_b;
  box_b.kind = Primitive::Kind::kBox;
  box_b.center = {-0.7, 0.5, 0.2};
  box_b.half_size = {0.25, 0.35, 0.2};
  box_b.texture = 1;
  Primitive ball;
  ball.kind = Primitive::Kind::kSphere;
  ball.center = {-0.3, -0.35, 0.3};
  ball.half_size = {0.3, 0.0, 0.0};
  ball.texture = 2;
  s.primitives = {ground, backdrop, box_a, box_b, ball};
  return s;
}

void to_json(nlohmann::json& j, const SceneSpec& s) {
  j = nlohmann::json::object();
  j["background"] = {s.background.r, s.background.g, s.background.b};
  j["textures"] = nlohmann::json::array();
  for (const auto& t : s.textures) {
    j["textures"].push_back({{"kind", kind_name(t.kind)},
                             {"scale", t.scale},
                             {"color_a", vec_json(t.color_a)},
                             {"color_b", vec_json(t.color_b)},
                             {"noise_scale", t.noise_scale},
                             {"noise_amplitude", t.noise_amplitude},
                             {"seed", t.seed}});
  }
  j["primitives"] = nlohmann::json::array();
  for (const auto& p : s.primitives) {
    nlohmann::json e = {{"kind", kind_name(p.kind)}, {"center", vec_json(p.center)}, {"texture", p.texture}};
    switch (p.kind) {
      case Primitive::Kind::kPlane:
        e["half_size"] = {p.half_size.x(), p.half_size.y()};
        e["normal"] = vec_json(p.normal);
        e["axis_u"] = vec_json(p.axis_u);
        break;
      case Primitive::Kind::kBox:
        e["half_size"] = vec_json(p.half_size);
        break;
      case Primitive::Kind::kSphere:
        e["radius"] = p.half_size.x();
        break;
    }
    j["primitives"].push_back(e);
  }
}

void from_json(const nlohmann::json& j, SceneSpec& s) {
  s = SceneSpec{};
  try {
    if (j.contains("background")) {
      const auto& b = j.at("background");
      s.background = {b.at(0).get<std::uint8_t>(), b.at(1).get<std::uint8_t>(), b.at(2).get<std::uint8_t>()};
    }
    for (const auto& t : j.at("textures")) {
      TextureSpec tex;
      const std::string kind = t.value("kind", std::string("checker-noise"));
      if (kind == "checker") tex.kind = TextureSpec::Kind::kChecker;
      else if (kind == "stripe") tex.kind = TextureSpec::Kind::kStripe;
      else if (kind == "noise") tex.kind = TextureSpec::Kind::kNoise;
      else if (kind == "checker-noise") tex.kind = TextureSpec::Kind::kCheckerNoise;
      else throw InvalidSpecError("unknown texture kind '" + kind + "'");
      tex.scale = t.value("scale", tex.scale);
      if (t.contains("color_a")) tex.color_a = json_vec(t["color_a"]);
      if (t.contains("color_b")) tex.color_b = json_vec(t["color_b"]);
      tex.noise_scale = t.value("noise_scale", tex.noise_scale);
      tex.noise_amplitude = t.value("noise_amplitude", tex.noise_amplitude);
      tex.seed = t.value("seed", tex.seed);
      s.textures.push_back(tex);
    }
    for (const auto& e : j.at("primitives")) {
      Primitive p;
      const std::string kind = e.at("kind").get<std::string>();
      p.center = json_vec(e.at("center"));
      p.texture = e.value("texture", 0);
      if (kind == "plane") {
        p.kind = Primitive::Kind::kPlane;
        const auto& h = e.at("half_size");
        p.half_size = {h.at(0).get<double>(), h.at(1).get<double>(), 0.0};
        if (e.contains("normal")) p.normal = json_vec(e["normal"]);
        if (e.contains("axis_u")) p.axis_u = json_vec(e["axis_u"]);
      } else if (kind == "box") {
        p.kind = Primitive::Kind::kBox;
        p.half_size = json_vec(e.at("half_size"));
      } else if (kind == "sphere") {
        p.kind = Primitive::Kind::kSphere;
        p.half_size = {e.at("radius").get<double>(), 0.0, 0.0};
      } else {
        throw InvalidSpecError("unknown primitive kind '" + kind + "'");
      }
      s.primitives.push_back(p);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidSpecError(std::string("malformed scene spec: ") + ex.what());
  }
  s.validate();
}

SceneSpec load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scene spec '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidSpecError("scene spec '" + path + "' is not valid JSON: " + ex.what());
  }
  return j.get<SceneSpec>();
}

std::optional<Hit> intersect_primitive(const Primitive& prim, const Vec3& origin, const Vec3& dir) {
  switch (prim.kind) {
    case Primitive::Kind::kPlane: {
      const double denom = prim.normal.dot(dir);
      if (std::abs(denom) < 1e-12) return std::nullopt;
      const double t = prim.normal.dot(prim.center - origin) / denom;
      if (!(t > kMinHitDistance)) return std::nullopt;
      const Vec3 point = origin + t * dir;
      const Vec3 rel = point - prim.center;
      const Vec3 v = prim.normal.cross(prim.axis_u);
      if (std::abs(rel.dot(prim.axis_u)) > prim.half_size.x() || std::abs(rel.dot(v)) > prim.half_size.y())
        return std::nullopt;
      return Hit{t, point, denom < 0.0 ? prim.normal : Vec3(-prim.normal), -1};
    }
    case Primitive::Kind::kBox: {
      double t_near = -std::numeric_limits<double>::infinity();
      double t_far = std::numeric_limits<double>::infinity();
      int near_axis = 0;
      int far_axis = 0;
      for (int a = 0; a < 3; ++a) {
        const double lo = prim.center[a] - prim.half_size[a];
        const double hi = prim.center[a] + prim.half_size[a];
        if (dir[a] == 0.0) {
          if (origin[a] < lo || origin[a] > hi) return std::nullopt;
          continue;
        }
        double t0 = (lo - origin[a]) / dir[a];
        double t1 = (hi - origin[a]) / dir[a];
        if (t0 > t1) std::swap(t0, t1);
        if (t0 > t_near) {
          t_near = t0;
          near_axis = a;
        }
        if (t1 < t_far) {
          t_far = t1;
          far_axis = a;
        }
      }
      if (t_near > t_far || !(t_far > kMinHitDistance)) return std::nullopt;
      const bool outside = t_near > kMinHitDistance;
      const double t = outside ? t_near : t_far;
      const int axis = outside ? near_axis : far_axis;
      Vec3 n = Vec3::Zero();
      n[axis] = dir[axis] > 0.0 ? -1.0 : 1.0;
      return Hit{t, origin + t * dir, n, -1};
    }
    case Primitive::Kind::kSphere: {
      const Vec3 oc = origin - prim.center;
      const double b = oc.dot(dir);
      const double c = oc.squaredNorm() - prim.half_size.x() * prim.half_size.x();
      const double disc = b * b - c;
      if (disc < 0.0) return std::nullopt;
      const double sq = std::sqrt(disc);
      double t = -b - sq;
      if (!(t > kMinHitDistance)) t = -b + sq;
      if (!(t > kMinHitDistance)) return std::nullopt;
      const Vec3 point = origin + t * dir;
      return Hit{t, point, (point - prim.center).normalized(), -1};
    }
  }
  return std::nullopt;
}

std::optional<Hit> intersect(const SceneSpec& scene, const Vec3& origin, const Vec3& dir) {
  std::optional<Hit> best;
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    auto hit = intersect_primitive(scene.primitives[i], origin, dir);
    if (hit && (!best || hit->distance < best->distance)) {
      hit->primitive = static_cast<int>(i);
      best = hit;
    }
  }
  return best;
}

Rgb8 shade(const SceneSpec& scene, const Hit& hit) {
  static const Vec3 kLight = Vec3(0.4, -0.3, 0.85).normalized();
  const Primitive& prim = scene.primitives[static_cast<std::size_t>(hit.primitive)];
  const TextureSpec& tex = scene.textures[static_cast<std::size_t>(prim.texture)];
  const Vec3 albedo = texture_color(tex, local_coordinates(prim, hit.point));
  const Vec3 c = albedo * (0.55 + 0.45 * std::abs(hit.normal.dot(kLight)));
  const auto to8 = [](double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); };
  return {to8(c.x()), to8(c.y()), to8(c.z())};
}

Vec3 pixel_ray(double x, double y, const CameraIntrinsics& cam, const PoseSE3& pose) {
  const Vec3 pc((x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0);
  return (pose.rotation * pc).normalized();
}

PixelSample render_pixel(const SceneSpec& scene, const CameraIntrinsics& cam, const PoseSE3& pose, int x, int y) {
  const Vec3 dir = pixel_ray(x, y, cam, pose);
  const auto hit = intersect(scene, pose.translation, dir);
  if (!hit) return {scene.background, 0.0f, false};
  return {shade(scene, *hit), static_cast<float>(hit->distance), true};
}

RenderedView render_view(const SceneSpec& scene, const CameraIntrinsics& cam, const PoseSE3& pose,
                         int frame_index) {
  scene.validate();
  cam.validate();
  RenderedView view{RgbImage(cam.width, cam.height), DepthMap(cam.width, cam.height), cam, pose, frame_index};
  const int h = cam.height;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const PixelSample s = render_pixel(scene, cam, pose, x, y);
      view.image(x, y) = s.color;
      if (s.valid) view.depth.set(x, y, s.depth);
    }
  }
  return view;
}

void TrajectorySpec::validate() const {
  if (frames < 2) throw InvalidSpecError("trajectory needs at least 2 frames");
  if (!(radius > 0.0)) throw InvalidSpecError("trajectory radius must be positive");
  if (!(arc_deg > 0.0 && arc_deg <= 360.0)) throw InvalidSpecError("trajectory arc must be in (0, 360]");
  if (!(jitter_deg >= 0.0 && jitter_deg < 90.0)) throw InvalidSpecError("jitter bound must be in [0, 90)");
}

void to_json(nlohmann::json& j, const TrajectorySpec& s) {
  j = {{"kind", kind_name(s.kind)},
       {"center", vec_json(s.center)},
       {"radius", s.radius},
       {"height", s.height},
       {"frames", s.frames},
       {"arc_deg", s.arc_deg},
       {"start_deg", s.start_deg},
       {"jitter_deg", s.jitter_deg},
       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, TrajectorySpec& s) {
  s = TrajectorySpec{};
  try {
    const std::string kind = j.value("kind", std::string("orbit-with-jitter"));
    if (kind == "orbit") s.kind = TrajectorySpec::Kind::kOrbit;
    else if (kind == "line") s.kind = TrajectorySpec::Kind::kLine;
    else if (kind == "orbit-with-jitter") s.kind = TrajectorySpec::Kind::kOrbitWithJitter;
    else throw InvalidSpecError("unknown trajectory kind '" + kind + "'");
    if (j.contains("center")) s.center = json_vec(j["center"]);
    s.radius = j.value("radius", s.radius);
    s.height = j.value("height", s.height);
    s.frames = j.value("frames", s.frames);
    s.arc_deg = j.value("arc_deg", s.arc_deg);
    s.start_deg = j.value("start_deg", s.start_deg);
    s.jitter_deg = j.value("jitter_deg", s.jitter_deg);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidSpecError(std::string("malformed trajectory spec: ") + ex.what());
  }
}

std::vector<PoseSE3> generate_trajectory(const TrajectorySpec& spec) {
  spec.validate();
  constexpr double kDeg = std::numbers::pi / 180.0;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<PoseSE3> poses;
  poses.reserve(static_cast<std::size_t>(spec.frames));
  for (int i = 0; i < spec.frames; ++i) {
    Vec3 eye;
    if (spec.kind == TrajectorySpec::Kind::kLine) {
      const double s = -spec.radius + 2.0 * spec.radius * i / (spec.frames - 1);
      eye = spec.center + Vec3(s, -spec.radius, spec.height);
    } else {
      const double theta = (spec.start_deg + spec.arc_deg * i / spec.frames) * kDeg;
      eye = spec.center + Vec3(spec.radius * std::cos(theta), spec.radius * std::sin(theta), spec.height);
    }
    PoseSE3 pose = PoseSE3::look_at(eye, spec.center);
    if (spec.kind == TrajectorySpec::Kind::kOrbitWithJitter && spec.jitter_deg > 0.0) {
      Vec3 axis(gauss(rng), gauss(rng), gauss(rng));
      axis.normalize();
      const double angle = spec.jitter_deg * kDeg * unit(rng);
      pose.rotation = pose.rotation * Eigen::AngleAxisd(angle, axis).toRotationMatrix();
    }
    poses.push_back(pose);
  }
  return poses;
}

std::vector<RenderedView> render_sequence(const SceneSpec& scene, const CameraIntrinsics& cam,
                                          const std::vector<PoseSE3>& poses) {
  std::vector<RenderedView> views;
  views.reserve(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) views.push_back(render_view(scene, cam, poses[i], static_cast<int>(i)));
  return views;
}

}  // namespace prp
