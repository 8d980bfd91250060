#pragma once

#include <cstdint>
#include <vector>

#include "prp/geometry.hpp"

namespace prp {

struct RegistrationOptions {
  int grid_stride = 1;  // dense descriptor grid spacing, px
  int descriptor_dim = 128;
  double ratio = 0.9;
  int ransac_iterations = 500;
  double inlier_threshold_m = 0.01;
  int chamfer_stride = 4;
  int refit_rounds = 3;  // weighted refits, each with the band shrunk to 3x the median residual
  bool subpixel = true;                 // photometric refinement of the view-2 match location
  double subpixel_depth_spread = 0.03;  // metres; larger 2x2 depth spreads fall back to the pixel
  std::uint64_t seed = 0;

  void validate() const;
};

struct RegistrationResult {
  PoseSE3 transform;  // view-1 camera frame -> view-2 camera frame
  double rotation_error_deg = 0.0;
  double translation_error_cm = 0.0;
  double chamfer_cm = 0.0;
  int matches = 0;
  int inliers = 0;
};

/// Symmetric mean nearest-neighbour distance. Throws ShapeError for an empty cloud.
double chamfer_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

/// Camera-frame points of every stride-th valid depth pixel.
std::vector<Vec3> depth_cloud(const RenderedView& view, int stride);

/// Dense grid descriptors, ratio-test mutual matching, depth lifting (view-2 locations refined
/// to sub-pixel by Lucas-Kanade on the grey images), then a RANSAC-gated
/// similarity-weighted Kabsch. Throws EstimationFailedError when fewer than 3 matches survive.
RegistrationResult register_pair(const RenderedView& v1, const RenderedView& v2, const RegistrationOptions& options = {});

}  // namespace prp
