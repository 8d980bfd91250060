#include "support.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numbers>

namespace prp::test {

namespace {

using Vec3L = Eigen::Matrix<long double, 3, 1>;
using Mat3L = Eigen::Matrix<long double, 3, 3>;

constexpr double kDeg = std::numbers::pi / 180.0;

}  // namespace

Vec3 oracle_backproject(const Vec2& p, double d, const CameraIntrinsics& cam, const PoseSE3& pose) {
  const Vec3L pc((static_cast<long double>(p.x()) - cam.cx) / cam.fx,
                 (static_cast<long double>(p.y()) - cam.cy) / cam.fy, 1.0L);
  const Vec3L ray = pc / std::sqrt(pc.squaredNorm());
  const Vec3L world = pose.rotation.cast<long double>() * (ray * static_cast<long double>(d)) +
                      pose.translation.cast<long double>();
  return world.cast<double>();
}

Vec2 oracle_project(const Vec3& x, const CameraIntrinsics& cam, const PoseSE3& pose, double* z) {
  const Vec3L local = pose.rotation.cast<long double>().transpose() *
                      (x.cast<long double>() - pose.translation.cast<long double>());
  if (z) *z = static_cast<double>(local.z());
  return {static_cast<double>(cam.fx * local.x() / local.z() + cam.cx),
          static_cast<double>(cam.fy * local.y() / local.z() + cam.cy)};
}

double quaternion_angle_deg(const Mat3& r) {
  const Eigen::Quaterniond q(r);
  return 2.0 * std::atan2(q.vec().norm(), std::abs(q.w())) / kDeg;
}

Mat3 random_rotation(std::mt19937_64& rng, double max_deg) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Vec3 axis = Vec3(g(rng), g(rng), g(rng)).normalized();
  return Eigen::AngleAxisd(max_deg * kDeg * u(rng), axis).toRotationMatrix();
}

PoseSE3 random_pose(std::mt19937_64& rng, double max_deg, double max_translation) {
  std::uniform_real_distribution<double> u(-max_translation, max_translation);
  PoseSE3 p;
  p.rotation = random_rotation(rng, max_deg);
  p.translation = Vec3(u(rng), u(rng), u(rng));
  return p;
}

CameraIntrinsics random_camera(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size(32, 640);
  std::uniform_real_distribution<double> focal(0.5, 2.0), shift(0.3, 0.7);
  CameraIntrinsics c;
  c.width = size(rng);
  c.height = size(rng);
  c.fx = focal(rng) * c.width;
  c.fy = focal(rng) * c.width;
  c.cx = shift(rng) * c.width;
  c.cy = shift(rng) * c.height;
  return c;
}

Mat3 rotation_homography(const CameraIntrinsics& k1, const PoseSE3& c2w_1, const CameraIntrinsics& k2,
                         const PoseSE3& c2w_2) {
  return k2.matrix() * c2w_2.rotation.transpose() * c2w_1.rotation * k1.inverse_matrix();
}

SceneSpec fronto_plane_scene(double z, double half_extent, TextureSpec::Kind kind) {
  SceneSpec s;
  TextureSpec t;
  t.kind = kind;
  t.scale = 0.15;
  t.noise_scale = 0.03;
  t.seed = 5;
  s.textures = {t};
  Primitive plane;
  plane.kind = Primitive::Kind::kPlane;
  plane.center = {0.0, 0.0, z};
  plane.normal = {0.0, 0.0, -1.0};
  plane.axis_u = {1.0, 0.0, 0.0};
  plane.half_size = {half_extent, half_extent, 0.0};
  s.primitives = {plane};
  return s;
}

SceneSpec two_plane_scene(double z_fg, double z_bg, double edge_x) {
  SceneSpec s;
  TextureSpec fg;
  fg.kind = TextureSpec::Kind::kChecker;
  fg.scale = 0.1;
  fg.color_a = {230.0, 200.0, 40.0};
  fg.color_b = {30.0, 30.0, 120.0};
  TextureSpec bg;
  bg.kind = TextureSpec::Kind::kNoise;
  bg.noise_scale = 0.05;
  bg.seed = 3;
  s.textures = {fg, bg};
  constexpr double kWide = 20.0;
  Primitive front;
  front.kind = Primitive::Kind::kPlane;
  front.center = {edge_x - kWide, 0.0, z_fg};
  front.normal = {0.0, 0.0, -1.0};
  front.axis_u = {1.0, 0.0, 0.0};
  front.half_size = {kWide, kWide, 0.0};
  front.texture = 0;
  Primitive back = front;
  back.center = {0.0, 0.0, z_bg};
  back.half_size = {4.0 * kWide, 4.0 * kWide, 0.0};
  back.texture = 1;
  s.primitives = {front, back};
  return s;
}

PoseSE3 translated(const Vec3& eye) {
  PoseSE3 p;
  p.translation = eye;
  return p;
}

std::vector<CellQuad> brute_cells_prp(const RenderedView& src, const RenderedView& dst, int cell, double eps_s,
                                      const PrPParams& params) {
  const int shc = src.cam.height / cell, swc = src.cam.width / cell;
  const int dhc = dst.cam.height / cell, dwc = dst.cam.width / cell;
  const double off = 0.5 * (cell - 1);
  std::vector<CellQuad> out;
  for (int h = 0; h < shc; ++h)
    for (int w = 0; w < swc; ++w) {
      const ReprojectResult r = reproject(Vec2(cell * w + off, cell * h + off), src, dst, params);
      for (int h2 = 0; h2 < dhc; ++h2)
        for (int w2 = 0; w2 < dwc; ++w2) {
          if (!r.ok()) continue;
          const double dx = r.pixel.x() - (cell * w2 + off);
          const double dy = r.pixel.y() - (cell * h2 + off);
          if (std::sqrt(dx * dx + dy * dy) <= eps_s) out.push_back({h, w, h2, w2});
        }
    }
  return out;
}

std::vector<CellQuad> brute_cells_homography(const Mat3& hm, int src_w, int src_h, int dst_w, int dst_h, int cell,
                                             double eps_s) {
  const double off = 0.5 * (cell - 1);
  std::vector<CellQuad> out;
  for (int h = 0; h < src_h / cell; ++h)
    for (int w = 0; w < src_w / cell; ++w) {
      const Vec3 q = hm * Vec3(cell * w + off, cell * h + off, 1.0);
      if (q.z() == 0.0) continue;
      const double qx = q.x() / q.z(), qy = q.y() / q.z();
      for (int h2 = 0; h2 < dst_h / cell; ++h2)
        for (int w2 = 0; w2 < dst_w / cell; ++w2) {
          const double dx = qx - (cell * w2 + off);
          const double dy = qy - (cell * h2 + off);
          if (std::sqrt(dx * dx + dy * dy) <= eps_s) out.push_back({h, w, h2, w2});
        }
    }
  return out;
}

long double oracle_descriptor_loss(const Eigen::MatrixXd& a, int a_wc, const Eigen::MatrixXd& b, int b_wc,
                                   const PositiveSet& s, const DescriptorLossParams& params) {
  long double total = 0.0L;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < b.rows(); ++j) {
      long double dot = 0.0L;
      for (int k = 0; k < a.cols(); ++k) dot += static_cast<long double>(a(i, k)) * b(j, k);
      const bool pos = s.count({i / a_wc, i % a_wc, j / b_wc, j % b_wc}) > 0;
      if (pos)
        total += static_cast<long double>(params.lambda_d) * std::max(0.0L, params.m_p - dot);
      else
        total += std::max(0.0L, dot - params.m_n);
    }
  return total / (static_cast<long double>(a.rows()) * b.rows());
}

long double oracle_detector_loss(const Eigen::MatrixXd& logits, const std::vector<int>& targets) {
  long double total = 0.0L;
  for (int r = 0; r < logits.rows(); ++r) {
    long double z = 0.0L;
    for (int c = 0; c < logits.cols(); ++c) z += std::exp(static_cast<long double>(logits(r, c)));
    total += std::log(z) - logits(r, targets[static_cast<std::size_t>(r)]);
  }
  return total / logits.rows();
}

double numeric_auc(const std::vector<double>& errors, double t, double step) {
  if (errors.empty()) return 0.0;
  std::vector<double> sorted = errors;
  std::sort(sorted.begin(), sorted.end());
  const long steps = std::lround(t / step);
  double acc = 0.0;
  for (long k = 0; k < steps; ++k) {
    const double e = (static_cast<double>(k) + 0.5) * step;
    const auto n = std::upper_bound(sorted.begin(), sorted.end(), e) - sorted.begin();
    acc += static_cast<double>(n) / static_cast<double>(sorted.size());
  }
  return acc / static_cast<double>(steps);
}

PoseSE3 horn_alignment(const std::vector<Vec3>& p, const std::vector<Vec3>& q, const std::vector<double>& w) {
  double wsum = 0.0;
  Vec3 cp = Vec3::Zero(), cq = Vec3::Zero();
  for (std::size_t i = 0; i < p.size(); ++i) {
    wsum += w[i];
    cp += w[i] * p[i];
    cq += w[i] * q[i];
  }
  cp /= wsum;
  cq /= wsum;
  Mat3 m = Mat3::Zero();
  for (std::size_t i = 0; i < p.size(); ++i) m += w[i] * (p[i] - cp) * (q[i] - cq).transpose();
  const double sxx = m(0, 0), sxy = m(0, 1), sxz = m(0, 2);
  const double syx = m(1, 0), syy = m(1, 1), syz = m(1, 2);
  const double szx = m(2, 0), szy = m(2, 1), szz = m(2, 2);
  Eigen::Matrix4d n;
  n << sxx + syy + szz, syz - szy, szx - sxz, sxy - syx,
       syz - szy, sxx - syy - szz, sxy + syx, szx + sxz,
       szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy,
       sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(n);
  const Eigen::Vector4d v = es.eigenvectors().col(3);
  const Eigen::Quaterniond quat(v(0), v(1), v(2), v(3));
  PoseSE3 t;
  t.rotation = quat.normalized().toRotationMatrix();
  t.translation = cq - t.rotation * cp;
  return t;
}

double weighted_cost(const PoseSE3& t, const std::vector<Vec3>& p, const std::vector<Vec3>& q,
                     const std::vector<double>& w) {
  double c = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) c += w[i] * (t.apply(p[i]) - q[i]).squaredNorm();
  return c;
}

}  // namespace prp::test
