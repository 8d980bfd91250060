#include "prp/estimation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "prp/errors.hpp"

namespace prp {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

/// Similarity taking the points to zero centroid and mean distance sqrt(2).
std::optional<Mat3> hartley(const std::vector<Vec2>& pts) {
  Vec2 c = Vec2::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double mean = 0.0;
  for (const auto& p : pts) mean += (p - c).norm();
  mean /= static_cast<double>(pts.size());
  if (!(mean > 1e-300)) return std::nullopt;
  const double s = std::sqrt(2.0) / mean;
  Mat3 t;
  t << s, 0, -s * c.x(), 0, s, -s * c.y(), 0, 0, 1;
  return t;
}

Vec2 apply(const Mat3& t, const Vec2& p) {
  const Vec3 q = t * p.homogeneous();
  return q.hnormalized();
}

/// Null vector of A (last right singular vector).
Eigen::VectorXd null_vector(const Eigen::MatrixXd& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  return svd.matrixV().col(svd.matrixV().cols() - 1);
}

double triangle_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * std::abs((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x());
}

bool has_collinear_triple(const std::vector<Vec2>& pts, double tol) {
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      for (std::size_t k = j + 1; k < pts.size(); ++k)
        if (triangle_area(pts[i], pts[j], pts[k]) < tol) return true;
  return false;
}

/// True when the RMS spread off the principal axis is below tol.
bool all_collinear(const std::vector<Vec2>& pts, double tol) {
  if (pts.size() < 3) return true;
  Vec2 c = Vec2::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : pts) cov += (p - c) * (p - c).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  return std::sqrt(std::max(0.0, es.eigenvalues()(0)) / static_cast<double>(pts.size())) < tol;
}

}  // namespace

void RansacOptions::validate() const {
  if (iterations < 1) throw InvalidSpecError("RANSAC needs at least one iteration");
  if (!(threshold > 0.0)) throw InvalidSpecError("RANSAC threshold must be positive");
}

void EssentialOptions::validate() const {
  if (iterations < 1) throw InvalidSpecError("RANSAC needs at least one iteration");
  if (!(threshold_px > 0.0)) throw InvalidSpecError("essential threshold must be positive");
  if (min_sample < 8) throw InvalidSpecError("the eight-point solver needs min_sample >= 8");
}

std::vector<std::vector<int>> ransac_samples(int n, int sample_size, int iterations, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<int> pool(static_cast<std::size_t>(n));
  std::vector<std::vector<int>> out(static_cast<std::size_t>(iterations));
  for (auto& s : out) {
    for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    s.resize(static_cast<std::size_t>(sample_size));
    for (int k = 0; k < sample_size; ++k) {
      std::uniform_int_distribution<int> pick(k, n - 1);
      std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(pick(rng))]);
      s[static_cast<std::size_t>(k)] = pool[static_cast<std::size_t>(k)];
    }
  }
  return out;
}

int best_hypothesis(const std::vector<int>& counts) {
  int best = -1;
  for (int i = 0; i < static_cast<int>(counts.size()); ++i)
    if (counts[static_cast<std::size_t>(i)] >= 0 && (best < 0 || counts[static_cast<std::size_t>(i)] > counts[static_cast<std::size_t>(best)]))
      best = i;
  return best;
}

std::optional<Mat3> dlt_homography(const std::vector<Vec2>& src, const std::vector<Vec2>& dst) {
  if (src.size() != dst.size() || src.size() < 4) return std::nullopt;
  const auto ts = hartley(src), td = hartley(dst);
  if (!ts || !td) return std::nullopt;
  const auto n = static_cast<Eigen::Index>(src.size());
  Eigen::MatrixXd a(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec2 p = apply(*ts, src[static_cast<std::size_t>(i)]);
    const Vec2 q = apply(*td, dst[static_cast<std::size_t>(i)]);
    a.row(2 * i) << -p.x(), -p.y(), -1, 0, 0, 0, q.x() * p.x(), q.x() * p.y(), q.x();
    a.row(2 * i + 1) << 0, 0, 0, -p.x(), -p.y(), -1, q.y() * p.x(), q.y() * p.y(), q.y();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // A second (near) null direction means H is not pinned down.
  if (sv(7) <= 1e-10 * sv(0)) return std::nullopt;
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Mat3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  Mat3 out = td->inverse() * hn * *ts;
  if (!out.allFinite() || std::abs(out(2, 2)) < 1e-300) {
    if (!out.allFinite() || out.norm() == 0.0) return std::nullopt;
    return out / out.norm();
  }
  out /= out(2, 2);
  if (std::abs(out.determinant()) < 1e-12 * std::pow(out.norm(), 3)) return std::nullopt;
  return out;
}

double transfer_error(const Mat3& h, const Vec2& p, const Vec2& q) {
  const Vec3 x = h * p.homogeneous();
  if (std::abs(x.z()) < 1e-15) return INFINITY;
  return (x.hnormalized() - q).norm();
}

HomographyEstimate estimate_homography(const MatchSet& matches, const RansacOptions& options) {
  options.validate();
  const int n = static_cast<int>(matches.size());
  if (n < 4) throw EstimationFailedError("homography needs at least 4 matches, got " + std::to_string(n));
  const int sample_size = std::max(4, options.min_sample);
  if (n < sample_size) throw EstimationFailedError("fewer matches than the RANSAC sample size");
  const auto samples = ransac_samples(n, sample_size, options.iterations, options.seed);

  auto consensus = [&](const Mat3& h) {
    std::vector<int> in;
    for (int i = 0; i < n; ++i)
      if (transfer_error(h, matches[static_cast<std::size_t>(i)].p1, matches[static_cast<std::size_t>(i)].p2) <= options.threshold)
        in.push_back(i);
    return in;
  };

  std::vector<int> counts(samples.size(), -1);
  std::vector<Mat3> models(samples.size(), Mat3::Identity());
#pragma omp parallel for schedule(dynamic, 16)
  for (int it = 0; it < static_cast<int>(samples.size()); ++it) {
    std::vector<Vec2> a, b;
    for (const int idx : samples[static_cast<std::size_t>(it)]) {
      a.push_back(matches[static_cast<std::size_t>(idx)].p1);
      b.push_back(matches[static_cast<std::size_t>(idx)].p2);
    }
    if (has_collinear_triple(a, 1e-6) || has_collinear_triple(b, 1e-6)) continue;
    const auto h = dlt_homography(a, b);
    if (!h) continue;
    models[static_cast<std::size_t>(it)] = *h;
    counts[static_cast<std::size_t>(it)] = static_cast<int>(consensus(*h).size());
  }
  const int best = best_hypothesis(counts);
  if (best < 0) throw DegenerateConfigurationError("every RANSAC sample was degenerate");

  HomographyEstimate out;
  out.homography = models[static_cast<std::size_t>(best)];
  out.inliers = consensus(out.homography);
  out.hypothesis_inliers = static_cast<int>(out.inliers.size());
  std::vector<Vec2> a, b;
  for (const int i : out.inliers) {
    a.push_back(matches[static_cast<std::size_t>(i)].p1);
    b.push_back(matches[static_cast<std::size_t>(i)].p2);
  }
  if (all_collinear(a, 1e-6) || all_collinear(b, 1e-6))
    throw DegenerateConfigurationError("homography consensus set is collinear");
  if (const auto refit = dlt_homography(a, b)) {
    auto refit_inliers = consensus(*refit);
    if (refit_inliers.size() >= out.inliers.size()) {
      out.homography = *refit;
      out.inliers = std::move(refit_inliers);
    }
  }
  return out;
}

RelativeMotion relative_motion(const PoseSE3& c2w_1, const PoseSE3& c2w_2) {
  const Mat3 r2t = c2w_2.rotation.transpose();
  return {r2t * c2w_1.rotation, r2t * (c2w_1.translation - c2w_2.translation)};
}

std::optional<Mat3> eight_point(const std::vector<Vec3>& x1, const std::vector<Vec3>& x2) {
  if (x1.size() != x2.size() || x1.size() < 8) return std::nullopt;
  std::vector<Vec2> a, b;
  for (std::size_t i = 0; i < x1.size(); ++i) {
    a.push_back(x1[i].hnormalized());
    b.push_back(x2[i].hnormalized());
  }
  const auto t1 = hartley(a), t2 = hartley(b);
  if (!t1 || !t2) return std::nullopt;
  const auto n = static_cast<Eigen::Index>(a.size());
  Eigen::MatrixXd m(n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec2 p = apply(*t1, a[static_cast<std::size_t>(i)]);
    const Vec2 q = apply(*t2, b[static_cast<std::size_t>(i)]);
    m.row(i) << q.x() * p.x(), q.x() * p.y(), q.x(), q.y() * p.x(), q.y() * p.y(), q.y(), p.x(), p.y(), 1.0;
  }
  const Eigen::VectorXd f = null_vector(m);
  Mat3 fn;
  fn << f(0), f(1), f(2), f(3), f(4), f(5), f(6), f(7), f(8);
  const Mat3 e = t2->transpose() * fn * *t1;
  if (!e.allFinite()) return std::nullopt;
  Eigen::JacobiSVD<Mat3> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (!(svd.singularValues()(1) > 1e-12 * svd.singularValues()(0))) return std::nullopt;
  return Mat3(svd.matrixU() * Vec3(1, 1, 0).asDiagonal() * svd.matrixV().transpose());
}

double sampson_distance(const Mat3& e, const Vec3& x1, const Vec3& x2) {
  const Vec3 ex1 = e * x1;
  const Vec3 etx2 = e.transpose() * x2;
  const double num = x2.dot(ex1);
  const double den = ex1.x() * ex1.x() + ex1.y() * ex1.y() + etx2.x() * etx2.x() + etx2.y() * etx2.y();
  if (den <= 0.0) return INFINITY;
  return std::abs(num) / std::sqrt(den);
}

namespace {

/// Depths (l1, l2) with l2 x2 = R l1 x1 + t in the least-squares sense.
Eigen::Vector2d triangulate_depths(const Mat3& r, const Vec3& t, const Vec3& x1, const Vec3& x2) {
  Eigen::Matrix<double, 3, 2> a;
  a.col(0) = r * x1;
  a.col(1) = -x2;
  return a.colPivHouseholderQr().solve(-t);
}

}  // namespace

std::optional<RelativePose> decompose_essential(const Mat3& e, const std::vector<Vec3>& x1,
                                                const std::vector<Vec3>& x2) {
  Eigen::JacobiSVD<Mat3> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU(), v = svd.matrixV();
  if (u.determinant() < 0) u = -u;
  if (v.determinant() < 0) v = -v;
  Mat3 w;
  w << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Mat3 rs[2] = {u * w * v.transpose(), u * w.transpose() * v.transpose()};
  const Vec3 t = u.col(2);
  int best = -1;
  RelativePose out;
  for (int c = 0; c < 4; ++c) {
    const Mat3& r = rs[c / 2];
    const Vec3 tc = (c % 2 == 0) ? t : Vec3(-t);
    int front = 0;
    for (std::size_t i = 0; i < x1.size(); ++i) {
      const Eigen::Vector2d d = triangulate_depths(r, tc, x1[i], x2[i]);
      if (d(0) > 0.0 && d(1) > 0.0) ++front;
    }
    if (front > best) {
      best = front;
      out.rotation = r;
      out.translation = tc.normalized();
    }
  }
  if (best <= 0) return std::nullopt;
  return out;
}

RelativePose estimate_essential(const MatchSet& matches, const CameraIntrinsics& k1, const CameraIntrinsics& k2,
                                const EssentialOptions& options) {
  options.validate();
  const int n = static_cast<int>(matches.size());
  if (n < options.min_sample)
    throw EstimationFailedError("essential estimation needs at least " + std::to_string(options.min_sample) +
                                " matches, got " + std::to_string(n));
  const Mat3 k1i = k1.inverse_matrix(), k2i = k2.inverse_matrix();
  std::vector<Vec3> x1(static_cast<std::size_t>(n)), x2(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    x1[static_cast<std::size_t>(i)] = k1i * matches[static_cast<std::size_t>(i)].p1.homogeneous();
    x2[static_cast<std::size_t>(i)] = k2i * matches[static_cast<std::size_t>(i)].p2.homogeneous();
  }
  const double threshold = options.threshold_px / (0.25 * (k1.fx + k1.fy + k2.fx + k2.fy));

  auto consensus = [&](const Mat3& e) {
    std::vector<int> in;
    for (int i = 0; i < n; ++i)
      if (sampson_distance(e, x1[static_cast<std::size_t>(i)], x2[static_cast<std::size_t>(i)]) <= threshold)
        in.push_back(i);
    return in;
  };
  auto gather = [&](const std::vector<int>& idx, std::vector<Vec3>& a, std::vector<Vec3>& b) {
    a.clear();
    b.clear();
    for (const int i : idx) {
      a.push_back(x1[static_cast<std::size_t>(i)]);
      b.push_back(x2[static_cast<std::size_t>(i)]);
    }
  };

  const auto samples = ransac_samples(n, options.min_sample, options.iterations, options.seed);
  std::vector<int> counts(samples.size(), -1);
  std::vector<Mat3> models(samples.size(), Mat3::Zero());
#pragma omp parallel for schedule(dynamic, 16)
  for (int it = 0; it < static_cast<int>(samples.size()); ++it) {
    std::vector<Vec3> a, b;
    gather(samples[static_cast<std::size_t>(it)], a, b);
    const auto e = eight_point(a, b);
    if (!e) continue;
    models[static_cast<std::size_t>(it)] = *e;
    counts[static_cast<std::size_t>(it)] = static_cast<int>(consensus(*e).size());
  }
  const int best = best_hypothesis(counts);
  if (best < 0) throw DegenerateConfigurationError("every essential-matrix sample was degenerate");

  Mat3 e = models[static_cast<std::size_t>(best)];
  std::vector<int> inliers = consensus(e);
  const int hypothesis_inliers = static_cast<int>(inliers.size());
  if (static_cast<int>(inliers.size()) >= 8) {
    std::vector<Vec3> a, b;
    gather(inliers, a, b);
    if (const auto refit = eight_point(a, b)) {
      auto refit_inliers = consensus(*refit);
      if (refit_inliers.size() >= inliers.size()) {
        e = *refit;
        inliers = std::move(refit_inliers);
      }
    }
  }
  std::vector<Vec3> a, b;
  gather(inliers, a, b);
  auto pose = decompose_essential(e, a, b);
  if (!pose) throw EstimationFailedError("no essential decomposition passes the cheirality check");
  pose->inliers = std::move(inliers);
  pose->hypothesis_inliers = hypothesis_inliers;

  std::vector<double> parallax;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Vec3 r1 = (pose->rotation * a[i]).normalized();
    const Vec3 r2 = b[i].normalized();
    parallax.push_back(std::atan2(r1.cross(r2).norm(), r1.dot(r2)) * kRadToDeg);
  }
  std::nth_element(parallax.begin(), parallax.begin() + static_cast<std::ptrdiff_t>(parallax.size() / 2), parallax.end());
  pose->translation_reliable = !parallax.empty() && parallax[parallax.size() / 2] >= kMinParallaxDeg;
  return *pose;
}

PoseSE3 kabsch_weighted(const std::vector<Vec3>& p, const std::vector<Vec3>& q, const std::vector<double>& w) {
  if (p.size() != q.size() || p.size() != w.size()) throw ShapeError("kabsch inputs differ in length");
  double total = 0.0;
  Vec3 cp = Vec3::Zero(), cq = Vec3::Zero();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(w[i] >= 0.0) || !std::isfinite(w[i])) throw InvalidSpecError("kabsch weights must be finite and non-negative");
    total += w[i];
    cp += w[i] * p[i];
    cq += w[i] * q[i];
  }
  if (!(total > 0.0)) throw DegenerateConfigurationError("kabsch weights sum to zero");
  cp /= total;
  cq /= total;
  Mat3 cov = Mat3::Zero();
  Mat3 spread = Mat3::Zero();
  for (std::size_t i = 0; i < p.size(); ++i) {
    cov += w[i] * (p[i] - cp) * (q[i] - cq).transpose();
    spread += w[i] * (p[i] - cp) * (p[i] - cp).transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> es(spread);
  const Vec3 ev = es.eigenvalues();
  if (!(ev(1) > 1e-12 * std::max(ev(2), 1e-300))) throw DegenerateConfigurationError("kabsch points are collinear");
  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3 u = svd.matrixU(), v = svd.matrixV();
  const double d = (v * u.transpose()).determinant() < 0 ? -1.0 : 1.0;
  PoseSE3 out;
  out.rotation = v * Vec3(1, 1, d).asDiagonal() * u.transpose();
  out.translation = cq - out.rotation * cp;
  return out;
}

double rotation_angle_deg(const Mat3& r) {
  const Vec3 axis(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  return std::atan2(0.5 * axis.norm(), 0.5 * (r.trace() - 1.0)) * kRadToDeg;
}

}  // namespace prp
