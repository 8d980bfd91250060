#include "prp/reference/serial.hpp"

#include <algorithm>
#include <cmath>

namespace prp::serial {

namespace {

double at(const GrayImage& g, int x, int y) {
  return g(std::clamp(x, 0, g.width() - 1), std::clamp(y, 0, g.height() - 1));
}

}  // namespace

Heatmap detect(const GrayImage& image) {
  const int w = image.width(), h = image.height();
  if (w < kMinDetectSize || h < kMinDetectSize) throw TooSmallError("image too small");
  const double kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  const double g1[3] = {0.25, 0.5, 0.25};
  std::vector<double> resp(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  double peak = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double a = 0.0, b = 0.0, c = 0.0;
      for (int wy = -1; wy <= 1; ++wy)
        for (int wx = -1; wx <= 1; ++wx) {
          // Gradient at the (clamped) window pixel; replicated borders apply to both stages.
          const int px = std::clamp(x + wx, 0, w - 1), py = std::clamp(y + wy, 0, h - 1);
          double gx = 0.0, gy = 0.0;
          for (int j = -1; j <= 1; ++j)
            for (int i = -1; i <= 1; ++i) {
              const double v = at(image, px + i, py + j);
              gx += kx[j + 1][i + 1] * v;
              gy += kx[i + 1][j + 1] * v;
            }
          const double wt = g1[wx + 1] * g1[wy + 1];
          a += wt * gx * gx;
          b += wt * gx * gy;
          c += wt * gy * gy;
        }
      const double tr = a + c, det = a * c - b * b;
      const double lmin = std::max(0.0, 0.5 * tr - std::sqrt(std::max(0.0, 0.25 * tr * tr - det)));
      resp[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)] = lmin;
      peak = std::max(peak, lmin);
    }
  Heatmap out(w, h, 0.0f);
  if (peak > 0.0)
    for (std::size_t i = 0; i < resp.size(); ++i) out.data()[i] = static_cast<float>(resp[i] / peak);
  return out;
}

std::vector<PixelPoint> nms(const Heatmap& heatmap, int radius, double threshold) {
  const int w = heatmap.width(), h = heatmap.height();
  std::vector<PixelPoint> kept;
  std::vector<bool> used(heatmap.size(), false);
  while (true) {
    int best = -1;
    for (int i = 0; i < static_cast<int>(heatmap.size()); ++i) {
      const float v = heatmap.data()[i];
      if (used[static_cast<std::size_t>(i)] || !(v > 0.0f) || static_cast<double>(v) < threshold) continue;
      if (best < 0 || v > heatmap.data()[best]) best = i;
    }
    if (best < 0) break;
    used[static_cast<std::size_t>(best)] = true;
    const int x = best % w, y = best / w;
    bool near = false;
    for (const auto& k : kept)
      if (std::abs(k.x - x) <= radius && std::abs(k.y - y) <= radius) near = true;
    if (!near) kept.push_back({x, y, heatmap(x, y)});
  }
  (void)h;
  return kept;
}

std::vector<IndexMatch> match_mnn(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, std::optional<double> ratio) {
  const int n = static_cast<int>(a.rows()), m = static_cast<int>(b.rows());
  auto sim = [&](int i, int j) {
    double s = 0.0;
    for (int d = 0; d < a.cols(); ++d) s += a(i, d) * b(j, d);
    return s;
  };
  auto nearest_in_b = [&](int i) {
    int best = 0;
    for (int j = 1; j < m; ++j)
      if (sim(i, j) > sim(i, best)) best = j;
    return best;
  };
  auto nearest_in_a = [&](int j) {
    int best = 0;
    for (int i = 1; i < n; ++i)
      if (sim(i, j) > sim(best, j)) best = i;
    return best;
  };
  auto dist = [](double s) { return std::sqrt(std::max(0.0, 2.0 - 2.0 * s)); };
  std::vector<IndexMatch> out;
  if (n == 0 || m == 0) return out;
  for (int i = 0; i < n; ++i) {
    const int j = nearest_in_b(i);
    if (nearest_in_a(j) != i) continue;
    if (ratio) {
      double second_b = -INFINITY, second_a = -INFINITY;
      for (int k = 0; k < m; ++k)
        if (k != j) second_b = std::max(second_b, sim(i, k));
      for (int k = 0; k < n; ++k)
        if (k != i) second_a = std::max(second_a, sim(k, j));
      const double d1 = dist(sim(i, j));
      if (second_b != -INFINITY && !(dist(second_b) > 0.0 && d1 / dist(second_b) < *ratio)) continue;
      if (second_a != -INFINITY && !(dist(second_a) > 0.0 && d1 / dist(second_a) < *ratio)) continue;
    }
    out.push_back({i, j, sim(i, j)});
  }
  return out;
}

}  // namespace prp::serial
