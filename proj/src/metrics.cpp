#include "prp/metrics.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

#include "prp/errors.hpp"

namespace prp {

Transfer homography_transfer(const Mat3& h, int dst_width, int dst_height) {
  return [h, dst_width, dst_height](const Vec2& p) -> std::optional<Vec2> {
    const Vec3 q = h * p.homogeneous();
    if (std::abs(q.z()) < 1e-15) return std::nullopt;
    const Vec2 r = q.hnormalized();
    if (r.x() < -0.5 || r.y() < -0.5 || r.x() >= dst_width - 0.5 || r.y() >= dst_height - 0.5) return std::nullopt;
    return r;
  };
}

Transfer prp_transfer(const RenderedView& src, const RenderedView& dst, const PrPParams& params) {
  return [&src, &dst, params](const Vec2& p) -> std::optional<Vec2> {
    if (!src.cam.in_bounds(p)) return std::nullopt;
    const ReprojectResult r = reproject(p, src, dst, params);
    if (!r.ok()) return std::nullopt;
    return r.pixel;
  };
}

namespace {

/// (points whose transfer lands, of those how many have a target within eps).
std::pair<int, int> directional_repeat(const KeypointSet& from, const KeypointSet& to, const Transfer& t, double eps) {
  int n = 0, c = 0;
  for (const auto& k : from) {
    const auto q = t(Vec2(k.x, k.y));
    if (!q) continue;
    ++n;
    for (const auto& o : to)
      if ((Vec2(o.x, o.y) - *q).norm() <= eps) {
        ++c;
        break;
      }
  }
  return {n, c};
}

}  // namespace

std::optional<double> repeatability(const KeypointSet& kps1, const KeypointSet& kps2, const Transfer& forward,
                                    const Transfer& backward, double eps) {
  const auto [n12, c12] = directional_repeat(kps1, kps2, forward, eps);
  const auto [n21, c21] = directional_repeat(kps2, kps1, backward, eps);
  if (n12 + n21 == 0) return std::nullopt;
  return static_cast<double>(c12 + c21) / static_cast<double>(n12 + n21);
}

int count_correct(const MatchSet& matches, const Transfer& gt, double eps) {
  int c = 0;
  for (const auto& m : matches) {
    const auto q = gt(m.p1);
    if (q && (*q - m.p2).norm() <= eps) ++c;
  }
  return c;
}

int count_transferable(const KeypointSet& kps, const Transfer& gt) {
  int n = 0;
  for (const auto& k : kps)
    if (gt(Vec2(k.x, k.y))) ++n;
  return n;
}

std::optional<double> mma(const MatchSet& matches, const Transfer& gt, double eps) {
  if (matches.empty()) return std::nullopt;
  return static_cast<double>(count_correct(matches, gt, eps)) / static_cast<double>(matches.size());
}

std::optional<double> matching_score(const MatchSet& matches, int transferable_detections, const Transfer& gt,
                                     double eps) {
  if (transferable_detections <= 0) return std::nullopt;
  return static_cast<double>(count_correct(matches, gt, eps)) / static_cast<double>(transferable_detections);
}

HomographyAccuracy homography_metrics(const Mat3& h_est, const Mat3& h_gt, int width, int height,
                                      const std::vector<double>& thresholds) {
  const Vec2 corners[4] = {{0.0, 0.0}, {width - 1.0, 0.0}, {0.0, height - 1.0}, {width - 1.0, height - 1.0}};
  double total = 0.0;
  for (const auto& c : corners) {
    const Vec3 a = h_est * c.homogeneous();
    const Vec3 b = h_gt * c.homogeneous();
    if (std::abs(a.z()) < 1e-15 || std::abs(b.z()) < 1e-15) {
      total = kFailed;
      break;
    }
    total += (a.hnormalized() - b.hnormalized()).norm();
  }
  HomographyAccuracy out;
  out.corner_error = std::isinf(total) ? kFailed : total / 4.0;
  for (const double t : thresholds) out.correct.emplace_back(t, out.corner_error <= t);
  return out;
}

std::vector<double> error_auc(const std::vector<double>& errors, const std::vector<double>& thresholds) {
  std::vector<double> out;
  for (const double t : thresholds) {
    if (!(t > 0.0)) throw InvalidSpecError("AUC threshold must be positive");
    if (errors.empty()) {
      out.push_back(0.0);
      continue;
    }
    double area = 0.0;
    for (const double e : errors) {
      if (std::isnan(e)) throw InvalidSpecError("NaN pose error");
      if (e < t) area += t - std::max(0.0, e);
    }
    out.push_back(area / (t * static_cast<double>(errors.size())));
  }
  return out;
}

PoseErrors pose_errors(const RelativePose& est, const Mat3& r_gt, const Vec3& t_gt) {
  PoseErrors out;
  out.rotation_deg = rotation_angle_deg(est.rotation.transpose() * r_gt);
  const double tn = t_gt.norm();
  if (tn <= 0.0) {
    out.translation_deg = std::nan("");
  } else {
    const Vec3 a = est.translation.normalized(), b = t_gt / tn;
    out.translation_deg = std::atan2(a.cross(b).norm(), std::abs(a.dot(b))) * 180.0 / std::numbers::pi;
  }
  return out;
}

double pose_error(const RelativePose& est, const Mat3& r_gt, const Vec3& t_gt, bool rotation_only) {
  const PoseErrors e = pose_errors(est, r_gt, t_gt);
  if (rotation_only || std::isnan(e.translation_deg)) return e.rotation_deg;
  return std::max(e.rotation_deg, e.translation_deg);
}

std::optional<double> MetricsReport::metric(const std::string& key) const {
  for (const auto& [k, v] : metrics)
    if (k == key) return v;
  return std::nullopt;
}

const MetricsReport* MetricsReport::section(const std::string& key) const {
  for (const auto& s : sections)
    if (s.name == key) return &s;
  return nullptr;
}

namespace {

nlohmann::json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

void csv_rows(const MetricsReport& r, const std::string& prefix, std::ostringstream& os) {
  const std::string sec = prefix.empty() ? r.name : prefix + "/" + r.name;
  for (const auto& [k, v] : r.counts) os << sec << ',' << k << ',' << v << '\n';
  for (const auto& [k, v] : r.metrics) os << sec << ',' << k << ',' << format_double(v) << '\n';
  for (const auto& s : r.sections) csv_rows(s, sec, os);
}

}  // namespace

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  if (!config_hash.empty()) {
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["config"] = config;
  }
  nlohmann::json c = nlohmann::json::object();
  for (const auto& [k, v] : counts) c[k] = v;
  j["counts"] = c;
  nlohmann::json m = nlohmann::json::array();
  for (const auto& [k, v] : metrics) m.push_back({{"name", k}, {"value", number(v)}});
  j["metrics"] = m;
  nlohmann::json s = nlohmann::json::array();
  for (const auto& sec : sections) s.push_back(sec.to_json());
  j["sections"] = s;
  return j;
}

std::string MetricsReport::to_csv() const {
  std::ostringstream os;
  os << "section,key,value\n";
  if (!config_hash.empty()) {
    os << name << ",config_hash," << config_hash << '\n';
    os << name << ",seed," << seed << '\n';
  }
  csv_rows(*this, "", os);
  return os.str();
}

MetricsReport pose_report(const std::string& name, const std::vector<PoseSample>& samples,
                          const std::vector<double>& thresholds, bool rotation_only) {
  MetricsReport r;
  r.name = name;
  std::vector<double> errors;
  int failed = 0;
  for (const auto& s : samples) {
    if (!s.estimate) {
      ++failed;
      errors.push_back(kFailed);
    } else {
      errors.push_back(pose_error(*s.estimate, s.r_gt, s.t_gt, rotation_only));
    }
  }
  r.count("pairs", static_cast<long long>(samples.size()));
  r.count("failed", failed);
  const auto aucs = error_auc(errors, thresholds);
  for (std::size_t i = 0; i < thresholds.size(); ++i) r.add("auc@" + format_double(thresholds[i]), aucs[i]);
  return r;
}

std::pair<MetricsReport, MetricsReport> pose_split_eval(const std::vector<PoseSample>& samples, double eps_t,
                                                        const std::vector<double>& thresholds) {
  std::vector<PoseSample> low, high;
  for (const auto& s : samples) (s.t_gt.norm() <= eps_t ? low : high).push_back(s);
  return {pose_report("low_translation_rotation_only", low, thresholds, true),
          pose_report("high_translation_max_error", high, thresholds, false)};
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double median(std::vector<double> values) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace prp
