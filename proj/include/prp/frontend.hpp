#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <optional>
#include <vector>

#include "prp/geometry.hpp"

namespace prp {

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  float score = 0.0f;
};
using KeypointSet = std::vector<Keypoint>;

/// Smallest image detect() accepts, per side.
constexpr int kMinDetectSize = 7;

/// Min-eigenvalue structure-tensor response (Sobel gradients, 3x3 Gaussian window, replicated
/// borders) scaled so the image maximum is 1. Throws TooSmallError below 7x7.
Heatmap detect(const RgbImage& image);
Heatmap detect(const GrayImage& image);

/// NMS followed by truncation to the k best; output sorted by descending score.
KeypointSet top_k(const Heatmap& heatmap, int k, int nms_radius, double threshold = 0.0);

constexpr int kPatchSize = 16;
constexpr int kHalfPatch = kPatchSize / 2;
constexpr int kRawDescriptorSize = 128;  // 4x4 spatial bins x 8 orientations

/// Descriptors for the keypoints far enough from the border; the rest are listed in `dropped`.
struct DescriptorSet {
  KeypointSet keypoints;       // kept keypoints, input order
  Eigen::MatrixXd descriptors;  // one unit row per kept keypoint
  std::vector<int> dropped;     // indices into the input list

  int size() const { return static_cast<int>(keypoints.size()); }
  int dim() const { return static_cast<int>(descriptors.cols()); }
};

/// True when the 16x16 patch around the rounded keypoint lies inside a width x height image.
bool describable(const Keypoint& kp, int width, int height);

/// Gradient-orientation histogram over a 16x16 patch, resampled to `dim` values, mean-centred,
/// L2-normalised, clipped at 0.2 and renormalised. Parallel over keypoints.
DescriptorSet describe(const RgbImage& image, const KeypointSet& keypoints, int dim);
DescriptorSet describe(const GrayImage& image, const KeypointSet& keypoints, int dim);

/// Area resampling of a histogram to `dim` bins followed by the normalisation above.
Eigen::VectorXd finalize_descriptor(const Eigen::VectorXd& histogram, int dim);

struct IndexMatch {
  int i = 0;
  int j = 0;
  double similarity = 0.0;
  bool operator==(const IndexMatch&) const = default;
};

/// Mutual nearest neighbours by dot-product similarity (ties go to the lower index), sorted by i.
/// With a ratio, a pair survives only when nearest/second-nearest distance sqrt(2 - 2s) is below
/// it in both directions.
std::vector<IndexMatch> match_mnn(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                  std::optional<double> ratio = std::nullopt);

/// "x y score d_1 ... d_D" per line.
void write_keypoints(const DescriptorSet& set, const std::filesystem::path& path);
DescriptorSet read_keypoints(const std::filesystem::path& path);

/// Bilinear warp: out(p) = image(H^-1 p); samples outside the source are black.
RgbImage warp_homography(const RgbImage& image, const Mat3& homography, int out_width, int out_height);

}  // namespace prp
