#include "prp/correspondence.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "prp/dataset_io.hpp"

namespace prp {

void PairSamplingParams::validate() const {
  if (lambda_l < 1 || lambda_u < lambda_l) throw InvalidSpecError("pair sampling needs 0 < lambda_l <= lambda_u");
}

PairSampler::PairSampler(int num_frames, const PairSamplingParams& params)
    : num_frames_(num_frames), max_offset_(std::min(params.lambda_u, num_frames - 1)), params_(params),
      rng_(params.seed) {
  params.validate();
  if (num_frames <= params.lambda_l)
    throw EmptySceneError("scene has " + std::to_string(num_frames) + " frames; need more than lambda_l = " +
                          std::to_string(params.lambda_l));
  for (int k = params.lambda_l; k <= max_offset_; ++k) total_ += num_frames - k;
}

FramePair PairSampler::next() {
  std::uniform_int_distribution<std::int64_t> pick(0, total_ - 1);
  std::int64_t u = pick(rng_);
  for (int k = params_.lambda_l; k <= max_offset_; ++k) {
    const std::int64_t n = num_frames_ - k;
    if (u < n) return {static_cast<int>(u), static_cast<int>(u) + k};
    u -= n;
  }
  return {0, params_.lambda_l};  // unreachable
}

std::size_t CorrespondenceMap::valid_count() const {
  return static_cast<std::size_t>(
      std::count(reason.values().begin(), reason.values().end(), RejectReason::kNone));
}

CorrespondenceMap dense_correspondences(const RenderedView& src, const RenderedView& dst, const PrPParams& params) {
  params.validate();
  const int w = src.cam.width, h = src.cam.height;
  CorrespondenceMap map{w, h, src.frame_index, dst.frame_index, Grid<double>(w, h), Grid<double>(w, h),
                        Grid<RejectReason>(w, h)};
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const ReprojectResult r = reproject(Vec2(x, y), src, dst, params);
      map.target_x(x, y) = r.pixel.x();
      map.target_y(x, y) = r.pixel.y();
      map.reason(x, y) = r.reason;
    }
  }
  return map;
}

void write_correspondence_map(const CorrespondenceMap& map, const std::filesystem::path& dir, const std::string& stem) {
  Grid<float> xs(map.width, map.height), ys(map.width, map.height);
  Grid<std::uint8_t> mask(map.width, map.height);
  const float nan = std::numeric_limits<float>::quiet_NaN();
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      const bool ok = map.valid(x, y);
      xs(x, y) = ok ? static_cast<float>(map.target_x(x, y)) : nan;
      ys(x, y) = ok ? static_cast<float>(map.target_y(x, y)) : nan;
      mask(x, y) = ok ? 255 : static_cast<std::uint8_t>(map.reason(x, y));
    }
  }
  write_pfm(dir / (stem + "_x.pfm"), xs);
  write_pfm(dir / (stem + "_y.pfm"), ys);
  write_pgm(dir / (stem + "_valid.pgm"), mask);
}

CorrespondenceMap read_correspondence_map(const std::filesystem::path& dir, const std::string& stem) {
  const Grid<float> xs = read_pfm(dir / (stem + "_x.pfm"));
  const Grid<float> ys = read_pfm(dir / (stem + "_y.pfm"));
  const Grid<std::uint8_t> mask = read_pgm(dir / (stem + "_valid.pgm"));
  if (xs.width() != ys.width() || xs.height() != ys.height() || xs.width() != mask.width() ||
      xs.height() != mask.height())
    throw DimensionMismatchError("correspondence map '" + stem + "' has inconsistent component sizes");
  CorrespondenceMap map{xs.width(), xs.height(), 0, 0, Grid<double>(xs.width(), xs.height()),
                        Grid<double>(xs.width(), xs.height()), Grid<RejectReason>(xs.width(), xs.height())};
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      const std::uint8_t m = mask(x, y);
      if (m != 255 && (m < 1 || m > 4)) throw IoError("correspondence map '" + stem + "' has an unknown mask code");
      map.reason(x, y) = m == 255 ? RejectReason::kNone : static_cast<RejectReason>(m);
      map.target_x(x, y) = m == 255 ? xs(x, y) : 0.0;
      map.target_y(x, y) = m == 255 ? ys(x, y) : 0.0;
    }
  }
  return map;
}

bool CellCorrespondence::contains(const CellQuad& q) const {
  return std::binary_search(positives.begin(), positives.end(), q);
}

namespace {

CellCorrespondence make_cells(int src_w, int src_h, int dst_w, int dst_h, int cell, double eps_s) {
  if (cell < 1) throw InvalidSpecError("cell size must be >= 1");
  if (!(eps_s >= 0.0)) throw InvalidSpecError("eps_s must be non-negative");
  CellCorrespondence s;
  s.cell = cell;
  s.eps_s = eps_s;
  s.src_hc = src_h / cell;
  s.src_wc = src_w / cell;
  s.dst_hc = dst_h / cell;
  s.dst_wc = dst_w / cell;
  s.src_crop_width = s.src_wc * cell;
  s.src_crop_height = s.src_hc * cell;
  s.dst_crop_width = s.dst_wc * cell;
  s.dst_crop_height = s.dst_hc * cell;
  return s;
}

/// Appends every dst cell whose centre lies within eps_s of q. Visits cells in row-major order.
void append_matches(const CellCorrespondence& s, int h, int w, const Vec2& q, std::vector<CellQuad>& out) {
  const double off = 0.5 * (s.cell - 1);
  const double lo_x = (q.x() - s.eps_s - off) / s.cell, hi_x = (q.x() + s.eps_s - off) / s.cell;
  const double lo_y = (q.y() - s.eps_s - off) / s.cell, hi_y = (q.y() + s.eps_s - off) / s.cell;
  if (!(hi_x >= -1.0 && hi_y >= -1.0 && lo_x <= s.dst_wc && lo_y <= s.dst_hc)) return;
  // One extra cell of slack on each side; the exact test below decides.
  const int w0 = std::max(0, static_cast<int>(std::floor(lo_x)) - 1);
  const int w1 = std::min(s.dst_wc - 1, static_cast<int>(std::ceil(hi_x)) + 1);
  const int h0 = std::max(0, static_cast<int>(std::floor(lo_y)) - 1);
  const int h1 = std::min(s.dst_hc - 1, static_cast<int>(std::ceil(hi_y)) + 1);
  for (int h2 = h0; h2 <= h1; ++h2)
    for (int w2 = w0; w2 <= w1; ++w2)
      if (within_eps(q, cell_center(h2, w2, s.cell), s.eps_s)) out.push_back({h, w, h2, w2});
}

template <typename Transfer>
void fill_positives(CellCorrespondence& s, Transfer&& transfer) {
  std::vector<std::vector<CellQuad>> rows(static_cast<std::size_t>(s.src_hc));
  const int hc = s.src_hc;
#pragma omp parallel for schedule(dynamic)
  for (int h = 0; h < hc; ++h) {
    auto& row = rows[static_cast<std::size_t>(h)];
    for (int w = 0; w < s.src_wc; ++w) {
      const std::optional<Vec2> q = transfer(cell_center(h, w, s.cell));
      if (q) append_matches(s, h, w, *q, row);
    }
  }
  for (auto& row : rows) s.positives.insert(s.positives.end(), row.begin(), row.end());
}

}  // namespace

CellCorrespondence cell_correspondence_prp(const RenderedView& src, const RenderedView& dst, int cell, double eps_s,
                                           const PrPParams& params) {
  params.validate();
  CellCorrespondence s = make_cells(src.cam.width, src.cam.height, dst.cam.width, dst.cam.height, cell, eps_s);
  fill_positives(s, [&](const Vec2& p) -> std::optional<Vec2> {
    const ReprojectResult r = reproject(p, src, dst, params);
    if (!r.ok()) return std::nullopt;
    return r.pixel;
  });
  return s;
}

CellCorrespondence cell_correspondence_homography(const Mat3& homography, int src_width, int src_height,
                                                  int dst_width, int dst_height, int cell, double eps_s) {
  if (!homography.allFinite() || std::abs(homography.determinant()) < 1e-300)
    throw ShapeError("homography must be finite and invertible");
  CellCorrespondence s = make_cells(src_width, src_height, dst_width, dst_height, cell, eps_s);
  fill_positives(s, [&](const Vec2& p) -> std::optional<Vec2> {
    const Vec3 q = homography * p.homogeneous();
    if (q.z() == 0.0) return std::nullopt;
    return Vec2(q.x() / q.z(), q.y() / q.z());
  });
  return s;
}

void write_cell_correspondence(const CellCorrespondence& s, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (const auto& q : s.positives) out << q[0] << ' ' << q[1] << ' ' << q[2] << ' ' << q[3] << '\n';
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<CellQuad> read_cell_positives(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<CellQuad> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    CellQuad q;
    std::string extra;
    if (!(ls >> q[0] >> q[1] >> q[2] >> q[3]) || (ls >> extra))
      throw IoError("'" + path.string() + "' line " + std::to_string(lineno) + ": expected 'h w h' w''");
    out.push_back(q);
  }
  return out;
}

}  // namespace prp
