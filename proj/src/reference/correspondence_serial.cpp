#include "prp/reference/serial.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <limits>

namespace prp::serial {

CorrespondenceMap dense_correspondences(const RenderedView& src, const RenderedView& dst, const PrPParams& params) {
  params.validate();
  const int w = src.cam.width, h = src.cam.height;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CorrespondenceMap m{w, h, src.frame_index, dst.frame_index, Grid<double>(w, h, nan), Grid<double>(w, h, nan),
                      Grid<RejectReason>(w, h, RejectReason::kNone)};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const ReprojectResult r = reproject(Vec2(x, y), src, dst, params);
      m.reason(x, y) = r.reason;
      if (r.ok()) {
        m.target_x(x, y) = r.pixel.x();
        m.target_y(x, y) = r.pixel.y();
      }
    }
  return m;
}

namespace {

CellCorrespondence empty_cells(int sw, int sh, int dw, int dh, int cell, double eps_s) {
  CellCorrespondence s;
  s.cell = cell;
  s.eps_s = eps_s;
  s.src_hc = sh / cell;
  s.src_wc = sw / cell;
  s.dst_hc = dh / cell;
  s.dst_wc = dw / cell;
  s.src_crop_width = s.src_wc * cell;
  s.src_crop_height = s.src_hc * cell;
  s.dst_crop_width = s.dst_wc * cell;
  s.dst_crop_height = s.dst_hc * cell;
  return s;
}

template <typename Transfer>
void all_pairs(CellCorrespondence& s, Transfer&& transfer) {
  for (int h = 0; h < s.src_hc; ++h)
    for (int w = 0; w < s.src_wc; ++w) {
      const std::optional<Vec2> q = transfer(cell_center(h, w, s.cell));
      for (int h2 = 0; h2 < s.dst_hc; ++h2)
        for (int w2 = 0; w2 < s.dst_wc; ++w2)
          if (q && within_eps(*q, cell_center(h2, w2, s.cell), s.eps_s)) s.positives.push_back({h, w, h2, w2});
    }
}

}  // namespace

CellCorrespondence cell_correspondence_prp(const RenderedView& src, const RenderedView& dst, int cell, double eps_s,
                                           const PrPParams& params) {
  CellCorrespondence s = empty_cells(src.cam.width, src.cam.height, dst.cam.width, dst.cam.height, cell, eps_s);
  all_pairs(s, [&](const Vec2& p) -> std::optional<Vec2> {
    const ReprojectResult r = reproject(p, src, dst, params);
    if (!r.ok()) return std::nullopt;
    return r.pixel;
  });
  return s;
}

CellCorrespondence cell_correspondence_homography(const Mat3& homography, int src_width, int src_height,
                                                  int dst_width, int dst_height, int cell, double eps_s) {
  CellCorrespondence s = empty_cells(src_width, src_height, dst_width, dst_height, cell, eps_s);
  all_pairs(s, [&](const Vec2& p) -> std::optional<Vec2> {
    const Vec3 q = homography * p.homogeneous();
    if (q.z() == 0.0) return std::nullopt;
    return Vec2(q.x() / q.z(), q.y() / q.z());
  });
  return s;
}

}  // namespace prp::serial
