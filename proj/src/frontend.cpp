#include "prp/frontend.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "prp/adaptation.hpp"
#include "prp/errors.hpp"

namespace prp {

namespace {

double clamped(const GrayImage& g, int x, int y) {
  x = std::clamp(x, 0, g.width() - 1);
  y = std::clamp(y, 0, g.height() - 1);
  return g(x, y);
}

/// Sobel gradients with replicated borders.
void sobel(const GrayImage& g, GrayImage& gx, GrayImage& gy) {
  const int w = g.width(), h = g.height();
  gx = GrayImage(w, h);
  gy = GrayImage(w, h);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double a = clamped(g, x - 1, y - 1), b = clamped(g, x, y - 1), c = clamped(g, x + 1, y - 1);
      const double d = clamped(g, x - 1, y), f = clamped(g, x + 1, y);
      const double p = clamped(g, x - 1, y + 1), q = clamped(g, x, y + 1), r = clamped(g, x + 1, y + 1);
      gx(x, y) = (c + 2.0 * f + r) - (a + 2.0 * d + p);
      gy(x, y) = (p + 2.0 * q + r) - (a + 2.0 * b + c);
    }
}

}  // namespace

Heatmap detect(const RgbImage& image) { return detect(to_gray(image)); }

Heatmap detect(const GrayImage& image) {
  const int w = image.width(), h = image.height();
  if (w < kMinDetectSize || h < kMinDetectSize)
    throw TooSmallError("detect needs at least 7x7 pixels, got " + std::to_string(w) + "x" + std::to_string(h));
  GrayImage gx, gy;
  sobel(image, gx, gy);
  GrayImage xx(w, h), yy(w, h), xy(w, h);
  for (std::size_t i = 0; i < gx.size(); ++i) {
    xx.data()[i] = gx.data()[i] * gx.data()[i];
    yy.data()[i] = gy.data()[i] * gy.data()[i];
    xy.data()[i] = gx.data()[i] * gy.data()[i];
  }
  static constexpr double kWeights[3] = {0.25, 0.5, 0.25};
  GrayImage response(w, h);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double a = 0.0, b = 0.0, c = 0.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const double wt = kWeights[dx + 1] * kWeights[dy + 1];
          a += wt * clamped(xx, x + dx, y + dy);
          b += wt * clamped(xy, x + dx, y + dy);
          c += wt * clamped(yy, x + dx, y + dy);
        }
      const double half_diff = 0.5 * (a - c);
      const double lmin = 0.5 * (a + c) - std::sqrt(half_diff * half_diff + b * b);
      response(x, y) = std::max(0.0, lmin);
    }
  const double peak = *std::max_element(response.values().begin(), response.values().end());
  Heatmap out(w, h, 0.0f);
  if (peak > 0.0)
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = static_cast<float>(response.data()[i] / peak);
  return out;
}

KeypointSet top_k(const Heatmap& heatmap, int k, int nms_radius, double threshold) {
  if (k < 1) throw InvalidSpecError("top_k needs k >= 1");
  const std::vector<PixelPoint> pts = nms(heatmap, nms_radius, threshold);
  KeypointSet out;
  const std::size_t n = std::min(pts.size(), static_cast<std::size_t>(k));
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back({double(pts[i].x), double(pts[i].y), pts[i].score});
  return out;
}

bool describable(const Keypoint& kp, int width, int height) {
  const long x = std::lround(kp.x), y = std::lround(kp.y);
  return x - kHalfPatch >= 0 && y - kHalfPatch >= 0 && x + kHalfPatch - 1 < width && y + kHalfPatch - 1 < height;
}

Eigen::VectorXd finalize_descriptor(const Eigen::VectorXd& histogram, int dim) {
  if (dim < 1) throw InvalidSpecError("descriptor dimension must be >= 1");
  const int n = static_cast<int>(histogram.size());
  Eigen::VectorXd d = Eigen::VectorXd::Zero(dim);
  // Output bin k covers [k n / dim, (k+1) n / dim) of the input.
  for (int k = 0; k < dim; ++k) {
    const double lo = static_cast<double>(k) * n / dim, hi = static_cast<double>(k + 1) * n / dim;
    for (int i = static_cast<int>(std::floor(lo)); i < n && i < hi; ++i) {
      const double overlap = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
      if (overlap > 0.0) d[k] += overlap * histogram[i];
    }
  }
  d.array() -= d.mean();
  double norm = d.norm();
  if (norm <= 1e-12) return Eigen::VectorXd::Constant(dim, 1.0 / std::sqrt(dim));
  d /= norm;
  d = d.cwiseMax(-0.2).cwiseMin(0.2);
  norm = d.norm();
  return d / norm;
}

DescriptorSet describe(const RgbImage& image, const KeypointSet& keypoints, int dim) {
  return describe(to_gray(image), keypoints, dim);
}

DescriptorSet describe(const GrayImage& image, const KeypointSet& keypoints, int dim) {
  if (dim < 1) throw InvalidSpecError("descriptor dimension must be >= 1");
  DescriptorSet out;
  for (int i = 0; i < static_cast<int>(keypoints.size()); ++i) {
    if (describable(keypoints[i], image.width(), image.height()))
      out.keypoints.push_back(keypoints[i]);
    else
      out.dropped.push_back(i);
  }
  GrayImage gx, gy;
  sobel(image, gx, gy);
  const int n = out.size();
  out.descriptors.resize(n, dim);
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  const double sigma = 0.5 * kPatchSize;
#pragma omp parallel for schedule(static)
  for (int k = 0; k < n; ++k) {
    const int cx = static_cast<int>(std::lround(out.keypoints[k].x));
    const int cy = static_cast<int>(std::lround(out.keypoints[k].y));
    Eigen::VectorXd hist = Eigen::VectorXd::Zero(kRawDescriptorSize);
    for (int py = 0; py < kPatchSize; ++py)
      for (int px = 0; px < kPatchSize; ++px) {
        const int x = cx - kHalfPatch + px, y = cy - kHalfPatch + py;
        const double ddx = px + 0.5 - kHalfPatch, ddy = py + 0.5 - kHalfPatch;
        const double weight = std::exp(-(ddx * ddx + ddy * ddy) / (2.0 * sigma * sigma));
        const double mag = std::hypot(gx(x, y), gy(x, y)) * weight;
        if (mag == 0.0) continue;
        double angle = std::atan2(gy(x, y), gx(x, y));
        if (angle < 0.0) angle += kTwoPi;
        const double pos = angle / kTwoPi * 8.0;
        const int o0 = static_cast<int>(std::floor(pos)) % 8;
        const int o1 = (o0 + 1) % 8;
        const double frac = pos - std::floor(pos);
        const int cell = (py / 4) * 4 + px / 4;
        hist[cell * 8 + o0] += mag * (1.0 - frac);
        hist[cell * 8 + o1] += mag * frac;
      }
    out.descriptors.row(k) = finalize_descriptor(hist, dim).transpose();
  }
  return out;
}

std::vector<IndexMatch> match_mnn(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, std::optional<double> ratio) {
  std::vector<IndexMatch> out;
  if (a.rows() == 0 || b.rows() == 0) return out;
  if (a.cols() != b.cols()) throw ShapeError("descriptor sets have different dimensions");
  const int n = static_cast<int>(a.rows()), m = static_cast<int>(b.rows());

  struct Best {
    int index = -1;
    double first = -INFINITY;
    double second = -INFINITY;
  };
  auto consider = [](Best& best, int idx, double s) {
    if (s > best.first) {
      best.second = best.first;
      best.first = s;
      best.index = idx;
    } else if (s > best.second) {
      best.second = s;
    }
  };
  std::vector<Best> row_best(static_cast<std::size_t>(n)), col_best(static_cast<std::size_t>(m));
  constexpr int kBlock = 512;
  for (int r0 = 0; r0 < n; r0 += kBlock) {
    const int rows = std::min(kBlock, n - r0);
    const Eigen::MatrixXd sim = a.middleRows(r0, rows) * b.transpose();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < m; ++j) consider(row_best[static_cast<std::size_t>(r0 + i)], j, sim(i, j));
#pragma omp parallel for schedule(static)
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < rows; ++i) consider(col_best[static_cast<std::size_t>(j)], r0 + i, sim(i, j));
  }

  auto passes_ratio = [&](const Best& best) {
    if (!ratio) return true;
    if (best.second == -INFINITY) return true;
    const double d1 = std::sqrt(std::max(0.0, 2.0 - 2.0 * best.first));
    const double d2 = std::sqrt(std::max(0.0, 2.0 - 2.0 * best.second));
    if (d2 <= 0.0) return false;
    return d1 / d2 < *ratio;
  };
  for (int i = 0; i < n; ++i) {
    const Best& rb = row_best[static_cast<std::size_t>(i)];
    const int j = rb.index;
    if (j < 0 || col_best[static_cast<std::size_t>(j)].index != i) continue;
    if (!passes_ratio(rb) || !passes_ratio(col_best[static_cast<std::size_t>(j)])) continue;
    out.push_back({i, j, rb.first});
  }
  return out;
}

void write_keypoints(const DescriptorSet& set, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f.precision(17);
  for (int k = 0; k < set.size(); ++k) {
    const Keypoint& kp = set.keypoints[static_cast<std::size_t>(k)];
    f << kp.x << ' ' << kp.y << ' ' << kp.score;
    for (int d = 0; d < set.dim(); ++d) f << ' ' << set.descriptors(k, d);
    f << '\n';
  }
  if (!f) throw IoError("failed writing " + path.string());
}

DescriptorSet read_keypoints(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path.string());
  DescriptorSet out;
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    Keypoint kp;
    if (!(ss >> kp.x >> kp.y >> kp.score)) throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad keypoint");
    std::vector<double> d;
    double v;
    while (ss >> v) d.push_back(v);
    if (!rows.empty() && d.size() != rows.front().size())
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": descriptor length changes");
    out.keypoints.push_back(kp);
    rows.push_back(std::move(d));
  }
  const int dim = rows.empty() ? 0 : static_cast<int>(rows.front().size());
  out.descriptors.resize(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (int d = 0; d < dim; ++d) out.descriptors(static_cast<Eigen::Index>(r), d) = rows[r][static_cast<std::size_t>(d)];
  return out;
}

RgbImage warp_homography(const RgbImage& image, const Mat3& homography, int out_width, int out_height) {
  Eigen::FullPivLU<Mat3> lu(homography);
  if (!lu.isInvertible()) throw ShapeError("homography is singular");
  const Mat3 inv = lu.inverse();
  RgbImage out(out_width, out_height);
  const int w = image.width(), h = image.height();
#pragma omp parallel for schedule(static)
  for (int y = 0; y < out_height; ++y)
    for (int x = 0; x < out_width; ++x) {
      const Vec3 q = inv * Vec3(x, y, 1.0);
      if (std::abs(q.z()) < 1e-12) continue;
      const double sx = q.x() / q.z(), sy = q.y() / q.z();
      if (!(sx >= 0.0 && sy >= 0.0 && sx <= w - 1 && sy <= h - 1)) continue;
      const int x0 = std::min(static_cast<int>(sx), w - 2 < 0 ? 0 : w - 2);
      const int y0 = std::min(static_cast<int>(sy), h - 2 < 0 ? 0 : h - 2);
      const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      const double fx = sx - x0, fy = sy - y0;
      auto mix = [&](auto channel) {
        const double top = (1 - fx) * channel(image(x0, y0)) + fx * channel(image(x1, y0));
        const double bot = (1 - fx) * channel(image(x0, y1)) + fx * channel(image(x1, y1));
        return static_cast<std::uint8_t>(std::lround(std::clamp((1 - fy) * top + fy * bot, 0.0, 255.0)));
      };
      out(x, y) = {mix([](Rgb8 c) { return double(c.r); }), mix([](Rgb8 c) { return double(c.g); }),
                   mix([](Rgb8 c) { return double(c.b); })};
    }
  return out;
}

}  // namespace prp
