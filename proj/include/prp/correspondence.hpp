#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "prp/geometry.hpp"

namespace prp {

/// Bounds on the frame offset between the two images of a training pair.
struct PairSamplingParams {
  int lambda_l = 70;
  int lambda_u = 150;
  std::uint64_t seed = 0;

  void validate() const;
};

struct FramePair {
  int src = 0;
  int dst = 0;
  bool operator==(const FramePair&) const = default;
};

/// Draws pairs (src, dst) with dst - src in [lambda_l, lambda_u], uniformly over all admissible pairs.
class PairSampler {
 public:
  /// Throws EmptySceneError when the scene has no admissible pair.
  PairSampler(int num_frames, const PairSamplingParams& params);

  FramePair next();
  std::int64_t admissible_pairs() const { return total_; }

 private:
  int num_frames_;
  int max_offset_;
  PairSamplingParams params_;
  std::int64_t total_ = 0;
  std::mt19937_64 rng_;
};

/// Dense per-pixel ground-truth map from src pixel centres to dst coordinates.
struct CorrespondenceMap {
  int width = 0;
  int height = 0;
  int src_frame = 0;
  int dst_frame = 0;
  Grid<double> target_x;
  Grid<double> target_y;
  Grid<RejectReason> reason;

  bool valid(int x, int y) const { return reason(x, y) == RejectReason::kNone; }
  Vec2 target(int x, int y) const { return {target_x(x, y), target_y(x, y)}; }
  std::size_t valid_count() const;
};

/// Reprojects every src pixel centre into dst. Parallel over rows.
CorrespondenceMap dense_correspondences(const RenderedView& src, const RenderedView& dst, const PrPParams& params);

/// Writes <stem>_x.pfm, <stem>_y.pfm and <stem>_valid.pgm. The PGM holds 255 for valid
/// pixels and the RejectReason code otherwise; rejected targets are written as NaN.
void write_correspondence_map(const CorrespondenceMap& map, const std::filesystem::path& dir, const std::string& stem);
CorrespondenceMap read_correspondence_map(const std::filesystem::path& dir, const std::string& stem);

using CellQuad = std::array<int, 4>;  // (h, w, h', w')

/// Sparse cell-level indicator S: the listed quadruples are its positives.
struct CellCorrespondence {
  int cell = 8;
  double eps_s = 4.0;
  int src_hc = 0, src_wc = 0;
  int dst_hc = 0, dst_wc = 0;
  /// Image area actually covered by cells (the rest is cropped away).
  int src_crop_width = 0, src_crop_height = 0;
  int dst_crop_width = 0, dst_crop_height = 0;
  std::vector<CellQuad> positives;  // sorted lexicographically

  bool contains(const CellQuad& q) const;
};

/// Geometric centre of cell (h, w): (cell*w + (cell-1)/2, cell*h + (cell-1)/2).
inline Vec2 cell_center(int h, int w, int cell) {
  const double off = 0.5 * (cell - 1);
  return {cell * w + off, cell * h + off};
}

/// Euclidean distance test shared by both induced correspondences.
inline bool within_eps(const Vec2& transferred, const Vec2& center, double eps_s) {
  const double dx = transferred.x() - center.x();
  const double dy = transferred.y() - center.y();
  return std::sqrt(dx * dx + dy * dy) <= eps_s;
}

/// PrP-induced S: each src cell centre is reprojected; a rejected reprojection leaves a zero row.
CellCorrespondence cell_correspondence_prp(const RenderedView& src, const RenderedView& dst, int cell, double eps_s,
                                           const PrPParams& params);

/// Homography-induced S. Throws ShapeError when H is singular.
CellCorrespondence cell_correspondence_homography(const Mat3& homography, int src_width, int src_height,
                                                  int dst_width, int dst_height, int cell, double eps_s);

/// One "h w h' w'" line per positive.
void write_cell_correspondence(const CellCorrespondence& s, const std::filesystem::path& path);
std::vector<CellQuad> read_cell_positives(const std::filesystem::path& path);

}  // namespace prp
