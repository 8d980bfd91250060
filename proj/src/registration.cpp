#include "prp/registration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/LU>

#include "prp/errors.hpp"
#include "prp/estimation.hpp"
#include "prp/frontend.hpp"
#include "prp/metrics.hpp"

namespace prp {

void RegistrationOptions::validate() const {
  if (grid_stride < 1 || chamfer_stride < 1) throw InvalidSpecError("registration strides must be >= 1");
  if (descriptor_dim < 1) throw InvalidSpecError("descriptor_dim must be >= 1");
  if (!(ratio > 0.0 && ratio <= 1.0)) throw InvalidSpecError("ratio must lie in (0, 1]");
  if (ransac_iterations < 1) throw InvalidSpecError("ransac_iterations must be >= 1");
  if (!(inlier_threshold_m > 0.0)) throw InvalidSpecError("inlier_threshold_m must be positive");
  if (refit_rounds < 0) throw InvalidSpecError("refit_rounds must be >= 0");
  if (!(subpixel_depth_spread >= 0.0)) throw InvalidSpecError("subpixel_depth_spread must be >= 0");
}

double chamfer_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  if (a.empty() || b.empty()) throw ShapeError("chamfer distance of an empty cloud");
  auto one_way = [](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
    std::vector<double> nn(from.size());
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < from.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) best = std::min(best, (from[i] - q).squaredNorm());
      nn[i] = std::sqrt(best);
    }
    double s = 0.0;
    for (const double d : nn) s += d;
    return s / static_cast<double>(from.size());
  };
  return 0.5 * (one_way(a, b) + one_way(b, a));
}

std::vector<Vec3> depth_cloud(const RenderedView& view, int stride) {
  std::vector<Vec3> out;
  const PoseSE3 identity;
  for (int y = 0; y < view.depth.height(); y += stride)
    for (int x = 0; x < view.depth.width(); x += stride)
      if (view.depth.valid(x, y)) out.push_back(backproject(Vec2(x, y), view.depth.at(x, y), view.cam, identity));
  return out;
}

namespace {

struct Lifted {
  std::vector<Vec3> points;
  KeypointSet keypoints;
};

/// Grid keypoints that can be described and have valid depth.
KeypointSet grid_keypoints(const RenderedView& v, int stride) {
  KeypointSet out;
  for (int y = kHalfPatch; y + kHalfPatch - 1 < v.cam.height; y += stride)
    for (int x = kHalfPatch; x + kHalfPatch - 1 < v.cam.width; x += stride)
      if (v.depth.valid(x, y)) out.push_back({double(x), double(y), 1.0f});
  return out;
}

Vec3 lift(const RenderedView& v, const Keypoint& k) {
  const int x = static_cast<int>(k.x), y = static_cast<int>(k.y);
  return backproject(Vec2(x, y), v.depth.at(x, y), v.cam, PoseSE3{});
}

double bilinear(const GrayImage& g, double x, double y) {
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0, fy = y - y0;
  return (1 - fy) * ((1 - fx) * g(x0, y0) + fx * g(x0 + 1, y0)) +
         fy * ((1 - fx) * g(x0, y0 + 1) + fx * g(x0 + 1, y0 + 1));
}

/// Translation-only Lucas-Kanade (inverse compositional): where the window of `a` around the
/// integer pixel `pa` sits in `b`, starting from `pb`. nullopt on a flat window, divergence or
/// a poor final fit.
std::optional<Vec2> refine_location(const GrayImage& a, const Vec2& pa, const GrayImage& b,
                                    const Vec2& pb) {
  constexpr int kHalf = 3;
  constexpr int kIterations = 20;
  const int ax = static_cast<int>(pa.x()), ay = static_cast<int>(pa.y());
  if (ax - kHalf - 1 < 0 || ay - kHalf - 1 < 0 || ax + kHalf + 1 >= a.width() ||
      ay + kHalf + 1 >= a.height())
    return std::nullopt;
  constexpr int kCount = (2 * kHalf + 1) * (2 * kHalf + 1);
  double t[kCount], gx[kCount], gy[kCount];
  Eigen::Matrix2d h = Eigen::Matrix2d::Zero();
  double energy = 0.0;
  int k = 0;
  for (int dy = -kHalf; dy <= kHalf; ++dy)
    for (int dx = -kHalf; dx <= kHalf; ++dx, ++k) {
      const int x = ax + dx, y = ay + dy;
      t[k] = a(x, y);
      gx[k] = 0.5 * (a(x + 1, y) - a(x - 1, y));
      gy[k] = 0.5 * (a(x, y + 1) - a(x, y - 1));
      h(0, 0) += gx[k] * gx[k];
      h(0, 1) += gx[k] * gy[k];
      h(1, 1) += gy[k] * gy[k];
    }
  h(1, 0) = h(0, 1);
  const double trace = h.trace();
  if (trace <= 0.0 || h.determinant() < 1e-3 * trace * trace) return std::nullopt;
  const Eigen::Matrix2d h_inv = h.inverse();
  for (k = 0; k < kCount; ++k) energy += t[k] * t[k];

  Vec2 p = pb;
  double residual = 0.0;
  for (int it = 0; it < kIterations; ++it) {
    if (p.x() - kHalf < 0 || p.y() - kHalf < 0 || p.x() + kHalf + 1 >= b.width() ||
        p.y() + kHalf + 1 >= b.height())
      return std::nullopt;
    Vec2 rhs = Vec2::Zero();
    residual = 0.0;
    k = 0;
    for (int dy = -kHalf; dy <= kHalf; ++dy)
      for (int dx = -kHalf; dx <= kHalf; ++dx, ++k) {
        const double e = bilinear(b, p.x() + dx, p.y() + dy) - t[k];
        rhs += e * Vec2(gx[k], gy[k]);
        residual += e * e;
      }
    const Vec2 step = h_inv * rhs;
    p -= step;
    if ((p - pb).norm() > 1.5) return std::nullopt;
    if (step.norm() < 1e-4) break;
  }
  if (residual > 1e-2 * energy) return std::nullopt;
  return p;
}

/// Bilinear ray distance at a sub-pixel location; nullopt when a corner is invalid or the
/// corners straddle a depth edge.
std::optional<double> bilinear_depth(const DepthMap& d, const Vec2& p, double max_spread) {
  const int x0 = static_cast<int>(std::floor(p.x())), y0 = static_cast<int>(std::floor(p.y()));
  double v[4];
  int k = 0;
  for (int dy = 0; dy <= 1; ++dy)
    for (int dx = 0; dx <= 1; ++dx) {
      if (!d.valid(x0 + dx, y0 + dy)) return std::nullopt;
      v[k++] = d.at(x0 + dx, y0 + dy);
    }
  if (*std::max_element(v, v + 4) - *std::min_element(v, v + 4) > max_spread) return std::nullopt;
  const double fx = p.x() - x0, fy = p.y() - y0;
  return (1 - fy) * ((1 - fx) * v[0] + fx * v[1]) + fy * ((1 - fx) * v[2] + fx * v[3]);
}

}  // namespace

RegistrationResult register_pair(const RenderedView& v1, const RenderedView& v2, const RegistrationOptions& options) {
  options.validate();
  const DescriptorSet d1 = describe(v1.image, grid_keypoints(v1, options.grid_stride), options.descriptor_dim);
  const DescriptorSet d2 = describe(v2.image, grid_keypoints(v2, options.grid_stride), options.descriptor_dim);
  const auto matches = match_mnn(d1.descriptors, d2.descriptors, options.ratio);
  if (matches.size() < 3)
    throw EstimationFailedError("registration found " + std::to_string(matches.size()) + " matches, need 3");

  const GrayImage g1 = to_gray(v1.image), g2 = to_gray(v2.image);
  auto refined_lift = [&](const IndexMatch& m) {
    const Keypoint& k1 = d1.keypoints[static_cast<std::size_t>(m.i)];
    const Keypoint& k2 = d2.keypoints[static_cast<std::size_t>(m.j)];
    const auto sub = refine_location(g1, Vec2(k1.x, k1.y), g2, Vec2(k2.x, k2.y));
    if (sub) {
      if (const auto d = bilinear_depth(v2.depth, *sub, options.subpixel_depth_spread))
        return backproject(*sub, *d, v2.cam, PoseSE3{});
    }
    return lift(v2, k2);
  };

  const int n = static_cast<int>(matches.size());
  std::vector<Vec3> p(static_cast<std::size_t>(n)), q(static_cast<std::size_t>(n));
  std::vector<double> w(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const auto& m = matches[static_cast<std::size_t>(i)];
    p[static_cast<std::size_t>(i)] = lift(v1, d1.keypoints[static_cast<std::size_t>(m.i)]);
    q[static_cast<std::size_t>(i)] =
        options.subpixel ? refined_lift(m) : lift(v2, d2.keypoints[static_cast<std::size_t>(m.j)]);
    w[static_cast<std::size_t>(i)] = std::max(0.0, m.similarity);
  }

  auto residual = [&](const PoseSE3& t, int i) {
    return (t.apply(p[static_cast<std::size_t>(i)]) - q[static_cast<std::size_t>(i)]).norm();
  };
  auto consensus = [&](const PoseSE3& t, double threshold) {
    std::vector<int> in;
    for (int i = 0; i < n; ++i)
      if (residual(t, i) <= threshold) in.push_back(i);
    return in;
  };
  auto fit = [&](const std::vector<int>& idx, bool weighted) {
    std::vector<Vec3> a, b;
    std::vector<double> ww;
    for (const int i : idx) {
      a.push_back(p[static_cast<std::size_t>(i)]);
      b.push_back(q[static_cast<std::size_t>(i)]);
      ww.push_back(weighted ? w[static_cast<std::size_t>(i)] : 1.0);
    }
    return kabsch_weighted(a, b, ww);
  };

  const auto samples = ransac_samples(n, 3, options.ransac_iterations, options.seed);
  std::vector<int> counts(samples.size(), -1);
  std::vector<PoseSE3> models(samples.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (int it = 0; it < static_cast<int>(samples.size()); ++it) {
    try {
      models[static_cast<std::size_t>(it)] = fit(samples[static_cast<std::size_t>(it)], false);
      counts[static_cast<std::size_t>(it)] =
          static_cast<int>(consensus(models[static_cast<std::size_t>(it)], options.inlier_threshold_m).size());
    } catch (const DegenerateConfigurationError&) {
    }
  }
  const int best = best_hypothesis(counts);
  if (best < 0) throw DegenerateConfigurationError("every registration sample was degenerate");
  PoseSE3 t = models[static_cast<std::size_t>(best)];
  double threshold = options.inlier_threshold_m;
  for (int round = 0; round <= options.refit_rounds; ++round) {
    const std::vector<int> inliers = consensus(t, threshold);
    try {
      t = fit(inliers, true);
    } catch (const DegenerateConfigurationError&) {
      break;
    }
    std::vector<double> r;
    for (const int i : consensus(t, threshold)) r.push_back(residual(t, i));
    if (r.size() < 3) break;
    threshold = std::min(options.inlier_threshold_m, 3.0 * median(r));
  }

  RegistrationResult out;
  out.transform = t;
  out.matches = n;
  out.inliers = static_cast<int>(consensus(t, options.inlier_threshold_m).size());
  const RelativeMotion gt = relative_motion(v1.pose, v2.pose);
  out.rotation_error_deg = rotation_angle_deg(t.rotation.transpose() * gt.rotation);
  out.translation_error_cm = 100.0 * (t.translation - gt.translation).norm();

  const std::vector<Vec3> cloud = depth_cloud(v1, options.chamfer_stride);
  std::vector<Vec3> by_gt, by_est;
  by_gt.reserve(cloud.size());
  by_est.reserve(cloud.size());
  for (const auto& x : cloud) {
    by_gt.push_back(gt.rotation * x + gt.translation);
    by_est.push_back(t.apply(x));
  }
  out.chamfer_cm = 100.0 * chamfer_distance(by_gt, by_est);
  return out;
}

}  // namespace prp
