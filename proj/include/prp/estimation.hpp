#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "prp/geometry.hpp"

namespace prp {

struct Match {
  Vec2 p1 = Vec2::Zero();
  Vec2 p2 = Vec2::Zero();
  double score = 1.0;
};
using MatchSet = std::vector<Match>;

struct RansacOptions {
  int iterations = 1000;
  double threshold = 3.0;
  std::uint64_t seed = 0;
  int min_sample = 0;  // 0 means the solver's minimum

  void validate() const;
};

/// Minimal-sample index sets drawn from one seeded stream. Sample i does not depend on the
/// total number of iterations, so a longer run replays a shorter one as its prefix.
std::vector<std::vector<int>> ransac_samples(int n, int sample_size, int iterations, std::uint64_t seed);

/// Index of the largest count; ties go to the lowest index. -1 when every count is negative.
int best_hypothesis(const std::vector<int>& counts);

/// Normalised DLT over all given pairs. nullopt when the points are degenerate.
std::optional<Mat3> dlt_homography(const std::vector<Vec2>& src, const std::vector<Vec2>& dst);

/// ||H p - q||, infinite when H p lands at infinity.
double transfer_error(const Mat3& h, const Vec2& p, const Vec2& q);

struct HomographyEstimate {
  Mat3 homography = Mat3::Identity();
  std::vector<int> inliers;
  int hypothesis_inliers = 0;  // consensus of the best minimal-sample hypothesis
};

/// RANSAC over 4-point samples (threshold in px), then a DLT refit on the inliers.
/// Throws EstimationFailedError below 4 matches, DegenerateConfigurationError on a collinear consensus.
HomographyEstimate estimate_homography(const MatchSet& matches, const RansacOptions& options = {});

/// Rotation plus unit translation with X2 = R X1 + t for camera-frame points.
struct RelativePose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::UnitX();
  bool translation_reliable = true;
  std::vector<int> inliers;
  int hypothesis_inliers = 0;
};

/// Ground-truth relative pose between two camera-to-world poses.
struct RelativeMotion {
  Mat3 rotation;
  Vec3 translation;  // metric
};
RelativeMotion relative_motion(const PoseSE3& c2w_1, const PoseSE3& c2w_2);

/// Median parallax below this marks the translation direction as unreliable.
constexpr double kMinParallaxDeg = 1.0;

struct EssentialOptions {
  int iterations = 1000;
  double threshold_px = 0.5;  // divided by the mean focal length
  int min_sample = 8;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Eight-point essential matrix on Hartley-normalised camera coordinates, rank-2 projected
/// to singular values (1, 1, 0). nullopt when the system is degenerate.
std::optional<Mat3> eight_point(const std::vector<Vec3>& x1, const std::vector<Vec3>& x2);

/// Sampson distance of normalised homogeneous points x1, x2 under x2^T E x1 = 0.
double sampson_distance(const Mat3& e, const Vec3& x1, const Vec3& x2);

/// Candidate (R, t) from E with the most points in front of both cameras.
std::optional<RelativePose> decompose_essential(const Mat3& e, const std::vector<Vec3>& x1, const std::vector<Vec3>& x2);

/// RANSAC essential matrix with Sampson threshold threshold_px / mean(fx1, fy1, fx2, fy2).
/// Throws EstimationFailedError below min_sample matches or when no decomposition passes cheirality.
RelativePose estimate_essential(const MatchSet& matches, const CameraIntrinsics& k1, const CameraIntrinsics& k2,
                                const EssentialOptions& options = {});

/// argmin sum w_i ||R p_i + t - q_i||^2. The result maps P onto Q.
/// Throws DegenerateConfigurationError when the weighted points are collinear or carry no weight.
PoseSE3 kabsch_weighted(const std::vector<Vec3>& p, const std::vector<Vec3>& q, const std::vector<double>& w);

/// Rotation angle of R in degrees.
double rotation_angle_deg(const Mat3& r);

}  // namespace prp
