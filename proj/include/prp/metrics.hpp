#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "prp/estimation.hpp"
#include "prp/frontend.hpp"

namespace prp {

/// Ground-truth transfer of an image-1 point into image 2; nullopt when it does not land in bounds.
using Transfer = std::function<std::optional<Vec2>(const Vec2&)>;

Transfer homography_transfer(const Mat3& h, int dst_width, int dst_height);
Transfer prp_transfer(const RenderedView& src, const RenderedView& dst, const PrPParams& params);

/// Pooled over both directions: (c12 + c21) / (n12 + n21), where n counts points whose transfer
/// lands in bounds and c those with a detection of the other image within eps of the transfer.
/// nullopt when no point transfers in either direction.
std::optional<double> repeatability(const KeypointSet& kps1, const KeypointSet& kps2, const Transfer& forward,
                                    const Transfer& backward, double eps);

/// A match is correct when p1 transfers to within eps of p2.
int count_correct(const MatchSet& matches, const Transfer& gt, double eps);
int count_transferable(const KeypointSet& kps, const Transfer& gt);

/// correct / |matches|; nullopt for an empty match set.
std::optional<double> mma(const MatchSet& matches, const Transfer& gt, double eps);
/// correct / transferable detections; nullopt when nothing transfers.
std::optional<double> matching_score(const MatchSet& matches, int transferable_detections, const Transfer& gt,
                                     double eps);

struct HomographyAccuracy {
  double corner_error = 0.0;
  std::vector<std::pair<double, bool>> correct;  // (threshold, corner_error <= threshold)
};

/// Mean displacement of the four image corners (0,0), (w-1,0), (0,h-1), (w-1,h-1).
HomographyAccuracy homography_metrics(const Mat3& h_est, const Mat3& h_gt, int width, int height,
                                      const std::vector<double>& thresholds = {3.0, 5.0});

/// Exact area under the cumulative error curve up to t, divided by t. Failures are +inf.
std::vector<double> error_auc(const std::vector<double>& errors, const std::vector<double>& thresholds);

constexpr double kFailed = std::numeric_limits<double>::infinity();

struct PoseErrors {
  double rotation_deg = 0.0;
  double translation_deg = 0.0;  // NaN when the true translation is zero
};

/// Rotation angle of R_est^T R_gt and the sign-free angle between translation directions.
PoseErrors pose_errors(const RelativePose& est, const Mat3& r_gt, const Vec3& t_gt);

/// max(rotation, translation), or rotation alone when asked or when t_gt is zero.
double pose_error(const RelativePose& est, const Mat3& r_gt, const Vec3& t_gt, bool rotation_only = false);

/// Named scalars, integer counts and nested sub-reports, in insertion order.
struct MetricsReport {
  std::string name;
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<std::pair<std::string, long long>> counts;
  std::vector<MetricsReport> sections;
  nlohmann::json config;  // echoed by the top-level report only
  std::string config_hash;
  std::uint64_t seed = 0;

  void add(const std::string& key, double value) { metrics.emplace_back(key, value); }
  void count(const std::string& key, long long value) { counts.emplace_back(key, value); }
  std::optional<double> metric(const std::string& key) const;
  const MetricsReport* section(const std::string& key) const;

  nlohmann::json to_json() const;
  /// "section,key,value" rows; nested sections are joined with '/'.
  std::string to_csv() const;
};

struct PoseSample {
  Mat3 r_gt = Mat3::Identity();
  Vec3 t_gt = Vec3::Zero();
  std::optional<RelativePose> estimate;  // nullopt for a failed estimation
};

/// Pose AUCs over all samples using max(rotation, translation).
MetricsReport pose_report(const std::string& name, const std::vector<PoseSample>& samples,
                          const std::vector<double>& thresholds, bool rotation_only);

/// Samples with ||t_gt|| <= eps_t are scored on rotation only, the rest on max(rotation, translation).
std::pair<MetricsReport, MetricsReport> pose_split_eval(const std::vector<PoseSample>& samples, double eps_t,
                                                        const std::vector<double>& thresholds = {5.0, 10.0, 20.0});

/// Formats a double so it reads back bit-exactly.
std::string format_double(double v);

double median(std::vector<double> values);

}  // namespace prp
