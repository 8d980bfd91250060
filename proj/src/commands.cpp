#include "prp/commands.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "prp/dataset_io.hpp"
#include "prp/errors.hpp"
#include "prp/frontend.hpp"

namespace prp {

namespace {

enum Stream : std::uint64_t {
  kTrajectoryStream = 1,
  kPairStream = 2,
  kAdaptationStream = 3,
  kHomographyStream = 4,
  kPoseStream = 5,
  kRegisterStream = 6,
  kLossStream = 7,
};

std::string padded(int v, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*d", width, v);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  double s = 0.0;
  for (const double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::vector<double> finite_only(const std::vector<double>& v) {
  std::vector<double> out;
  for (const double x : v)
    if (std::isfinite(x)) out.push_back(x);
  return out;
}

double fraction_within(const std::vector<double>& errors, double t) {
  if (errors.empty()) return 0.0;
  const auto n = std::count_if(errors.begin(), errors.end(), [t](double e) { return e <= t; });
  return static_cast<double>(n) / static_cast<double>(errors.size());
}

Dataset load_dataset(const RunConfig& config) { return read_dataset(config.dataset_dir); }

/// Keypoints and descriptors of one image under the configured frontend.
DescriptorSet extract(const RgbImage& image, const FrontendConfig& f) {
  const Heatmap h = detect(image);
  return describe(image, top_k(h, f.top_k, f.nms_radius, f.threshold), f.descriptor_dim);
}

MatchSet to_matches(const DescriptorSet& a, const DescriptorSet& b, const std::vector<IndexMatch>& idx) {
  MatchSet out;
  out.reserve(idx.size());
  for (const auto& m : idx) {
    const auto& ka = a.keypoints[static_cast<std::size_t>(m.i)];
    const auto& kb = b.keypoints[static_cast<std::size_t>(m.j)];
    out.push_back({Vec2(ka.x, ka.y), Vec2(kb.x, kb.y), m.similarity});
  }
  return out;
}

/// (src, dst) with dst - src in [lo, hi], drawn uniformly from one seeded stream.
std::vector<FramePair> offset_pairs(int frames, int count, int lo, int hi, std::uint64_t seed) {
  hi = std::min(hi, frames - 1);
  if (lo > hi) throw EmptySceneError("no frame pair with offset in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  std::mt19937_64 rng(seed);
  std::vector<FramePair> out;
  for (int i = 0; i < count; ++i) {
    std::uniform_int_distribution<int> off(lo, hi);
    const int k = off(rng);
    std::uniform_int_distribution<int> src(0, frames - 1 - k);
    const int s = src(rng);
    out.push_back({s, s + k});
  }
  return out;
}

Mat3 random_homography(int w, int h, double shift, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-shift, shift);
  const std::vector<Vec2> src = {{0.0, 0.0}, {w - 1.0, 0.0}, {w - 1.0, h - 1.0}, {0.0, h - 1.0}};
  std::vector<Vec2> dst;
  for (const auto& p : src) dst.push_back(p + Vec2(u(rng) * w, u(rng) * h));
  const auto hm = dlt_homography(src, dst);
  if (!hm) throw EstimationFailedError("random homography is degenerate");
  return *hm;
}

MetricsReport eval_homography(const RunConfig& c, const Dataset& ds) {
  MetricsReport r = make_report("eval_homography", c);
  const auto& hc = c.homography;
  std::mt19937_64 rng(derive_seed(c.seed, kHomographyStream));
  const int w = ds[0].cam.width, h = ds[0].cam.height;
  std::vector<double> corner_errors, rep3, rep5, mma3, mma5, ms3;
  long long skipped = 0, failed = 0, positives = 0;
  for (int i = 0; i < hc.pairs; ++i) {
    const int frame = static_cast<int>((static_cast<long long>(i) * ds.size()) / hc.pairs);
    const Mat3 hgt = random_homography(w, h, hc.max_corner_shift, rng);
    const RgbImage& img1 = ds[frame].image;
    const RgbImage img2 = warp_homography(img1, hgt, w, h);
    const DescriptorSet a = extract(img1, c.frontend), b = extract(img2, c.frontend);
    positives += static_cast<long long>(
        cell_correspondence_homography(hgt, w, h, w, h, c.pairs.cell, c.pairs.eps_s_homography).positives.size());
    const Transfer fwd = homography_transfer(hgt, w, h);
    const Transfer bwd = homography_transfer(hgt.inverse(), w, h);
    const MatchSet matches = to_matches(a, b, match_mnn(a.descriptors, b.descriptors));

    const auto r3 = repeatability(a.keypoints, b.keypoints, fwd, bwd, 3.0);
    const auto r5 = repeatability(a.keypoints, b.keypoints, fwd, bwd, 5.0);
    const auto m3 = mma(matches, fwd, 3.0);
    const auto m5 = mma(matches, fwd, 5.0);
    const auto s3 = matching_score(matches, count_transferable(a.keypoints, fwd), fwd, 3.0);
    if (!r3 || !m3 || !s3) ++skipped;
    if (r3) rep3.push_back(*r3);
    if (r5) rep5.push_back(*r5);
    if (m3) mma3.push_back(*m3);
    if (m5) mma5.push_back(*m5);
    if (s3) ms3.push_back(*s3);

    RansacOptions opt;
    opt.iterations = hc.ransac_iterations;
    opt.threshold = hc.ransac_threshold_px;
    opt.seed = derive_seed(c.seed, kHomographyStream) + static_cast<std::uint64_t>(i);
    try {
      const HomographyEstimate est = estimate_homography(matches, opt);
      corner_errors.push_back(homography_metrics(est.homography, hgt, w, h, hc.thresholds).corner_error);
    } catch (const EstimationFailedError&) {
      ++failed;
      corner_errors.push_back(kFailed);
    }
  }
  r.count("pairs", hc.pairs);
  r.count("estimation_failed", failed);
  r.count("skipped", skipped);
  r.count("cell_positives_homography", positives);
  for (const double t : hc.thresholds) r.add("accuracy@" + format_double(t), fraction_within(corner_errors, t));
  const auto aucs = error_auc(corner_errors, hc.thresholds);
  for (std::size_t i = 0; i < aucs.size(); ++i) r.add("auc@" + format_double(hc.thresholds[i]), aucs[i]);
  r.add("repeatability@3", mean_of(rep3));
  r.add("repeatability@5", mean_of(rep5));
  r.add("mma@3", mean_of(mma3));
  r.add("mma@5", mean_of(mma5));
  r.add("matching_score@3", mean_of(ms3));
  r.add("median_corner_error", median(corner_errors));
  return r;
}

MetricsReport eval_pose(const RunConfig& c, const Dataset& ds) {
  MetricsReport r = make_report("eval_pose", c);
  const auto& pc = c.pose;
  const auto pairs = offset_pairs(ds.size(), pc.pairs, pc.min_offset, pc.max_offset, derive_seed(c.seed, kPoseStream));
  std::vector<PoseSample> samples;
  long long unreliable = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const RenderedView& v1 = ds[pairs[i].src];
    const RenderedView& v2 = ds[pairs[i].dst];
    const DescriptorSet a = extract(v1.image, c.frontend), b = extract(v2.image, c.frontend);
    const MatchSet matches = to_matches(a, b, match_mnn(a.descriptors, b.descriptors));
    const RelativeMotion gt = relative_motion(v1.pose, v2.pose);
    PoseSample s{gt.rotation, gt.translation, std::nullopt};
    EssentialOptions opt;
    opt.iterations = pc.ransac_iterations;
    opt.threshold_px = pc.ransac_threshold_px;
    opt.seed = derive_seed(c.seed, kPoseStream) + static_cast<std::uint64_t>(i);
    try {
      s.estimate = estimate_essential(matches, v1.cam, v2.cam, opt);
      if (!s.estimate->translation_reliable) ++unreliable;
    } catch (const EstimationFailedError&) {
    }
    samples.push_back(s);
  }
  MetricsReport all = pose_report("all_pairs_max_error", samples, pc.auc_thresholds, false);
  for (const auto& [k, v] : all.counts) r.count(k, v);
  r.count("translation_unreliable", unreliable);
  for (const auto& [k, v] : all.metrics) r.add(k, v);
  auto [low, high] = pose_split_eval(samples, pc.split_threshold, pc.auc_thresholds);
  r.sections.push_back(std::move(low));
  r.sections.push_back(std::move(high));
  return r;
}

MetricsReport eval_register(const RunConfig& c, const Dataset& ds) {
  MetricsReport r = make_report("eval_register", c);
  const auto& rc = c.registration;
  const auto pairs =
      offset_pairs(ds.size(), rc.pairs, rc.min_offset, rc.max_offset, derive_seed(c.seed, kRegisterStream));
  std::vector<double> rot, trans, chamfer;
  long long failed = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    RegistrationOptions opt = rc.options;
    opt.seed = derive_seed(c.seed, kRegisterStream) + static_cast<std::uint64_t>(i);
    try {
      const RegistrationResult res = register_pair(ds[pairs[i].src], ds[pairs[i].dst], opt);
      rot.push_back(res.rotation_error_deg);
      trans.push_back(res.translation_error_cm);
      chamfer.push_back(res.chamfer_cm);
    } catch (const EstimationFailedError&) {
      ++failed;
      rot.push_back(kFailed);
      trans.push_back(kFailed);
      chamfer.push_back(kFailed);
    }
  }
  r.count("pairs", rc.pairs);
  r.count("failed", failed);
  auto block = [&](const std::string& name, const std::vector<double>& errs, const std::vector<double>& thresholds) {
    for (const double t : thresholds) r.add(name + "_accuracy@" + format_double(t), fraction_within(errs, t));
    const auto ok = finite_only(errs);
    r.add(name + "_mean", mean_of(ok));
    r.add(name + "_median", median(ok));
  };
  block("rotation_deg", rot, rc.rotation_thresholds_deg);
  block("translation_cm", trans, rc.translation_thresholds_cm);
  block("chamfer_cm", chamfer, rc.chamfer_thresholds_cm);
  return r;
}

}  // namespace

EvalTask parse_eval_task(const std::string& name) {
  if (name == "homography") return EvalTask::kHomography;
  if (name == "pose") return EvalTask::kPose;
  if (name == "register") return EvalTask::kRegister;
  throw InvalidSpecError("unknown eval task '" + name + "' (homography, pose, register)");
}

MetricsReport make_report(const std::string& name, const RunConfig& config) {
  MetricsReport r;
  r.name = name;
  r.config = to_json(config);
  r.config_hash = config_hash(config);
  r.seed = config.seed;
  return r;
}

void write_report(const MetricsReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "report.json");
    if (!f) throw IoError("cannot write " + (dir / "report.json").string());
    f << report.to_json().dump(2) << '\n';
  }
  std::ofstream f(dir / "report.csv");
  if (!f) throw IoError("cannot write " + (dir / "report.csv").string());
  f << report.to_csv();
}

MetricsReport cmd_synth(const RunConfig& config) {
  config.validate();
  config.validate_paths(false);
  TrajectorySpec traj = config.trajectory;
  traj.seed = derive_seed(config.seed, kTrajectoryStream);
  const auto poses = generate_trajectory(traj);
  const auto views = render_sequence(config.scene(), config.camera.intrinsics(), poses);
  write_dataset(views, config.output_dir);

  MetricsReport r = make_report("synth", config);
  r.count("frames", static_cast<long long>(views.size()));
  r.count("width", config.camera.width);
  r.count("height", config.camera.height);
  std::size_t valid = 0, total = 0;
  for (const auto& v : views) {
    for (const auto m : v.depth.mask().values()) valid += m != 0;
    total += v.depth.mask().size();
  }
  r.add("valid_depth_fraction", static_cast<double>(valid) / static_cast<double>(total));
  return r;
}

MetricsReport cmd_pairs(const RunConfig& config) {
  config.validate();
  config.validate_paths(true);
  const Dataset ds = load_dataset(config);
  PairSamplingParams sp = config.sampling;
  sp.seed = derive_seed(config.seed, kPairStream);
  PairSampler sampler(ds.size(), sp);

  const std::filesystem::path out = config.output_dir;
  const std::filesystem::path pair_dir = out / "pairs";
  std::filesystem::create_directories(pair_dir);
  std::ofstream list(out / "pairs.txt");
  if (!list) throw IoError("cannot write " + (out / "pairs.txt").string());

  std::vector<double> valid_fraction;
  long long positives = 0, reasons[5] = {0, 0, 0, 0, 0};
  int min_off = ds.size(), max_off = 0;
  for (int k = 0; k < config.pairs.count; ++k) {
    const FramePair p = sampler.next();
    list << p.src << ' ' << p.dst << '\n';
    min_off = std::min(min_off, p.dst - p.src);
    max_off = std::max(max_off, p.dst - p.src);
    const std::string stem = padded(k, 4) + "_" + padded(p.src, 5) + "_" + padded(p.dst, 5);
    const CorrespondenceMap map = dense_correspondences(ds[p.src], ds[p.dst], config.prp);
    for (const auto reason : map.reason.values()) ++reasons[static_cast<int>(reason)];
    valid_fraction.push_back(static_cast<double>(map.valid_count()) / static_cast<double>(map.reason.size()));
    if (config.pairs.write_dense) write_correspondence_map(map, pair_dir, stem);
    const CellCorrespondence s =
        cell_correspondence_prp(ds[p.src], ds[p.dst], config.pairs.cell, config.pairs.eps_s_prp, config.prp);
    positives += static_cast<long long>(s.positives.size());
    write_cell_correspondence(s, pair_dir / (stem + "_cells.txt"));
  }

  MetricsReport r = make_report("pairs", config);
  r.count("pairs", config.pairs.count);
  r.count("admissible_pairs", sampler.admissible_pairs());
  r.count("min_offset", min_off);
  r.count("max_offset", max_off);
  r.count("cell_positives", positives);
  for (int i = 0; i < 5; ++i) r.count(std::string("pixels_") + std::string(to_string(static_cast<RejectReason>(i))), reasons[i]);
  r.add("mean_valid_fraction", mean_of(valid_fraction));
  return r;
}

MetricsReport cmd_labels(const RunConfig& config) {
  config.validate();
  config.validate_paths(true);
  const Dataset ds = load_dataset(config);
  AdaptationParams ap = config.adaptation;
  ap.seed = derive_seed(config.seed, kAdaptationStream);
  const int last = ds.size() - ap.window_len;
  if (last < 0) throw EmptySceneError("dataset has fewer frames than the adaptation window");
  std::vector<int> refs;
  const int n = std::min(config.labels.references, last + 1);
  for (int k = 0; k < n; ++k) refs.push_back(n == 1 ? 0 : static_cast<int>((static_cast<long long>(k) * last) / (n - 1)));
  refs.erase(std::unique(refs.begin(), refs.end()), refs.end());

  const auto labels = projective_adaptation(
      ds.views, [](const RgbImage& img) { return detect(img); }, ap, config.prp, refs);
  std::filesystem::create_directories(config.output_dir);
  write_labels(labels, std::filesystem::path(config.output_dir) / "labels.txt");

  MetricsReport r = make_report("labels", config);
  long long total = 0;
  for (const auto& l : labels) total += static_cast<long long>(l.points.size());
  r.count("references", static_cast<long long>(labels.size()));
  r.count("labels", total);
  r.add("labels_per_reference", labels.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(labels.size()));
  return r;
}

MetricsReport cmd_eval(const RunConfig& config, EvalTask task) {
  config.validate();
  config.validate_paths(true);
  const Dataset ds = load_dataset(config);
  if (ds.size() == 0) throw EmptySceneError("dataset has no frames");
  switch (task) {
    case EvalTask::kHomography: return eval_homography(config, ds);
    case EvalTask::kPose: return eval_pose(config, ds);
    case EvalTask::kRegister: return eval_register(config, ds);
  }
  throw InvalidSpecError("unknown eval task");
}

MetricsReport cmd_losscheck(const RunConfig& config) {
  config.validate();
  const auto& lc = config.losscheck;
  const GradientCheckReport g =
      run_gradient_check(lc.instances, derive_seed(config.seed, kLossStream), config.loss, lc.descriptor_dim, lc.step);

  DescriptorGrid same(4, 4, lc.descriptor_dim);
  same.data.col(0).setOnes();
  CellCorrespondence none;
  none.src_hc = none.src_wc = none.dst_hc = none.dst_wc = 4;
  const double identical = descriptor_loss(same, same, none, config.loss).loss;

  MetricsReport r = make_report("losscheck", config);
  r.count("instances", g.instances);
  r.add("descriptor_max_rel_error", g.descriptor_max_rel_error);
  r.add("detector_max_rel_error", g.detector_max_rel_error);
  r.add("max_rel_error_allowed", lc.max_rel_error);
  r.add("identical_descriptors_no_positives_loss", identical);
  const bool ok = g.descriptor_max_rel_error <= lc.max_rel_error && g.detector_max_rel_error <= lc.max_rel_error;
  r.add("passed", ok ? 1.0 : 0.0);
  return r;
}

}  // namespace prp
