#include "prp/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "prp/errors.hpp"

namespace prp {

using nlohmann::json;

RunConfig default_config() {
  RunConfig c;
  c.trajectory.kind = TrajectorySpec::Kind::kOrbitWithJitter;
  c.trajectory.center = {0.0, 0.0, 0.3};
  c.trajectory.radius = 2.2;
  c.trajectory.height = 1.2;
  c.trajectory.frames = 200;
  c.trajectory.arc_deg = 60.0;
  c.trajectory.start_deg = -120.0;
  c.trajectory.jitter_deg = 1.0;
  return c;
}

void RunConfig::validate() const {
  if (camera.width < 16 || camera.height < 16) throw InvalidSpecError("camera must be at least 16x16");
  if (!(camera.hfov_deg > 0.0 && camera.hfov_deg < 180.0)) throw InvalidSpecError("hfov_deg must lie in (0, 180)");
  camera.intrinsics().validate();
  trajectory.validate();
  prp.validate();
  sampling.validate();
  if (sampling.lambda_u >= trajectory.frames)
    throw InvalidSpecError("lambda_u must be smaller than the number of frames");
  if (pairs.count < 1) throw InvalidSpecError("pairs.count must be >= 1");
  if (pairs.cell < 1) throw InvalidSpecError("pairs.cell must be >= 1");
  if (!(pairs.eps_s_prp > 0.0 && pairs.eps_s_homography > 0.0)) throw InvalidSpecError("eps_s must be positive");
  adaptation.validate();
  if (labels.references < 1) throw InvalidSpecError("labels.references must be >= 1");
  loss.validate();
  if (losscheck.instances < 1 || losscheck.descriptor_dim < 1 || !(losscheck.step > 0.0) ||
      !(losscheck.max_rel_error > 0.0))
    throw InvalidSpecError("losscheck parameters must be positive");
  if (frontend.top_k < 1 || frontend.nms_radius < 1 || frontend.descriptor_dim < 1)
    throw InvalidSpecError("frontend parameters must be positive");
  if (homography.pairs < 1 || homography.ransac_iterations < 1 || !(homography.ransac_threshold_px > 0.0) ||
      !(homography.max_corner_shift >= 0.0 && homography.max_corner_shift < 0.5))
    throw InvalidSpecError("invalid homography evaluation parameters");
  if (pose.pairs < 1 || pose.min_offset < 1 || pose.max_offset < pose.min_offset || pose.ransac_iterations < 1 ||
      !(pose.ransac_threshold_px > 0.0) || !(pose.split_threshold >= 0.0))
    throw InvalidSpecError("invalid pose evaluation parameters");
  if (registration.pairs < 1 || registration.min_offset < 0 || registration.max_offset < registration.min_offset)
    throw InvalidSpecError("invalid registration evaluation parameters");
  registration.options.validate();
  for (const auto* list : {&homography.thresholds, &pose.auc_thresholds, &registration.rotation_thresholds_deg,
                           &registration.translation_thresholds_cm, &registration.chamfer_thresholds_cm})
    for (const double t : *list)
      if (!(t > 0.0)) throw InvalidSpecError("thresholds must be positive");
}

void RunConfig::validate_paths(bool needs_dataset) const {
  if (!scene_path.empty() && !std::filesystem::exists(scene_path))
    throw InvalidSpecError("scene file '" + scene_path + "' does not exist");
  if (needs_dataset && !std::filesystem::exists(std::filesystem::path(dataset_dir) / "manifest.json"))
    throw InvalidSpecError("dataset '" + dataset_dir + "' has no manifest.json");
}

SceneSpec RunConfig::scene() const { return scene_path.empty() ? default_scene() : load_scene(scene_path); }

namespace {

const char* aggregation_name(Aggregation a) {
  switch (a) {
    case Aggregation::kMax: return "max";
    case Aggregation::kMean: return "mean";
    case Aggregation::kSum: return "sum";
  }
  return "max";
}

Aggregation aggregation_from(const std::string& s) {
  if (s == "max") return Aggregation::kMax;
  if (s == "mean") return Aggregation::kMean;
  if (s == "sum") return Aggregation::kSum;
  throw InvalidSpecError("unknown aggregation '" + s + "'");
}

/// Rejects keys outside `allowed` so typos do not silently fall back to defaults.
void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw InvalidSpecError(where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw InvalidSpecError("unknown key '" + k + "' in " + where);
}

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

json to_json(const RunConfig& c) {
  json traj = c.trajectory;
  traj.erase("seed");
  const auto& r = c.registration;
  return {
      {"scene", c.scene_path},
      {"dataset_dir", c.dataset_dir},
      {"output_dir", c.output_dir},
      {"seed", c.seed},
      {"camera", {{"width", c.camera.width}, {"height", c.camera.height}, {"hfov_deg", c.camera.hfov_deg}}},
      {"trajectory", traj},
      {"prp", {{"eps_d", c.prp.eps_d}, {"window", c.prp.window}}},
      {"sampling", {{"lambda_l", c.sampling.lambda_l}, {"lambda_u", c.sampling.lambda_u}}},
      {"pairs",
       {{"count", c.pairs.count},
        {"cell", c.pairs.cell},
        {"eps_s_prp", c.pairs.eps_s_prp},
        {"eps_s_homography", c.pairs.eps_s_homography},
        {"write_dense", c.pairs.write_dense}}},
      {"adaptation",
       {{"window_len", c.adaptation.window_len},
        {"n_sampled", c.adaptation.n_sampled},
        {"patch", c.adaptation.patch},
        {"nms_radius", c.adaptation.nms_radius},
        {"threshold", c.adaptation.threshold},
        {"aggregation", aggregation_name(c.adaptation.aggregation)}}},
      {"labels", {{"references", c.labels.references}}},
      {"loss", {{"m_p", c.loss.m_p}, {"m_n", c.loss.m_n}, {"lambda_d", c.loss.lambda_d}}},
      {"losscheck",
       {{"instances", c.losscheck.instances},
        {"descriptor_dim", c.losscheck.descriptor_dim},
        {"step", c.losscheck.step},
        {"max_rel_error", c.losscheck.max_rel_error}}},
      {"frontend",
       {{"top_k", c.frontend.top_k},
        {"nms_radius", c.frontend.nms_radius},
        {"threshold", c.frontend.threshold},
        {"descriptor_dim", c.frontend.descriptor_dim}}},
      {"eval",
       {{"homography",
         {{"pairs", c.homography.pairs},
          {"max_corner_shift", c.homography.max_corner_shift},
          {"thresholds", c.homography.thresholds},
          {"ransac_threshold_px", c.homography.ransac_threshold_px},
          {"ransac_iterations", c.homography.ransac_iterations}}},
        {"pose",
         {{"pairs", c.pose.pairs},
          {"min_offset", c.pose.min_offset},
          {"max_offset", c.pose.max_offset},
          {"auc_thresholds", c.pose.auc_thresholds},
          {"split_threshold", c.pose.split_threshold},
          {"ransac_threshold_px", c.pose.ransac_threshold_px},
          {"ransac_iterations", c.pose.ransac_iterations}}},
        {"register",
         {{"pairs", r.pairs},
          {"min_offset", r.min_offset},
          {"max_offset", r.max_offset},
          {"grid_stride", r.options.grid_stride},
          {"descriptor_dim", r.options.descriptor_dim},
          {"ratio", r.options.ratio},
          {"ransac_iterations", r.options.ransac_iterations},
          {"inlier_threshold_m", r.options.inlier_threshold_m},
          {"chamfer_stride", r.options.chamfer_stride},
          {"refit_rounds", r.options.refit_rounds},
          {"subpixel", r.options.subpixel},
          {"subpixel_depth_spread", r.options.subpixel_depth_spread},
          {"rotation_thresholds_deg", r.rotation_thresholds_deg},
          {"translation_thresholds_cm", r.translation_thresholds_cm},
          {"chamfer_thresholds_cm", r.chamfer_thresholds_cm}}}}},
  };
}

RunConfig config_from_json(const json& j) {
  RunConfig c = default_config();
  try {
    check_keys(j, "config", {"scene", "dataset_dir", "output_dir", "seed", "camera", "trajectory", "prp", "sampling",
                             "pairs", "adaptation", "labels", "loss", "losscheck", "frontend", "eval"});
    take(j, "scene", c.scene_path);
    take(j, "dataset_dir", c.dataset_dir);
    take(j, "output_dir", c.output_dir);
    take(j, "seed", c.seed);
    if (j.contains("camera")) {
      const auto& o = j["camera"];
      check_keys(o, "camera", {"width", "height", "hfov_deg"});
      take(o, "width", c.camera.width);
      take(o, "height", c.camera.height);
      take(o, "hfov_deg", c.camera.hfov_deg);
    }
    if (j.contains("trajectory")) {
      json t = c.trajectory;
      t.erase("seed");
      check_keys(j["trajectory"], "trajectory",
                 {"kind", "center", "radius", "height", "frames", "arc_deg", "start_deg", "jitter_deg"});
      t.update(j["trajectory"]);
      c.trajectory = t.get<TrajectorySpec>();
    }
    if (j.contains("prp")) {
      const auto& o = j["prp"];
      check_keys(o, "prp", {"eps_d", "window"});
      take(o, "eps_d", c.prp.eps_d);
      take(o, "window", c.prp.window);
    }
    if (j.contains("sampling")) {
      const auto& o = j["sampling"];
      check_keys(o, "sampling", {"lambda_l", "lambda_u"});
      take(o, "lambda_l", c.sampling.lambda_l);
      take(o, "lambda_u", c.sampling.lambda_u);
    }
    if (j.contains("pairs")) {
      const auto& o = j["pairs"];
      check_keys(o, "pairs", {"count", "cell", "eps_s_prp", "eps_s_homography", "write_dense"});
      take(o, "count", c.pairs.count);
      take(o, "cell", c.pairs.cell);
      take(o, "eps_s_prp", c.pairs.eps_s_prp);
      take(o, "eps_s_homography", c.pairs.eps_s_homography);
      take(o, "write_dense", c.pairs.write_dense);
    }
    if (j.contains("adaptation")) {
      const auto& o = j["adaptation"];
      check_keys(o, "adaptation", {"window_len", "n_sampled", "patch", "nms_radius", "threshold", "aggregation"});
      take(o, "window_len", c.adaptation.window_len);
      take(o, "n_sampled", c.adaptation.n_sampled);
      take(o, "patch", c.adaptation.patch);
      take(o, "nms_radius", c.adaptation.nms_radius);
      take(o, "threshold", c.adaptation.threshold);
      if (o.contains("aggregation")) c.adaptation.aggregation = aggregation_from(o["aggregation"].get<std::string>());
    }
    if (j.contains("labels")) {
      check_keys(j["labels"], "labels", {"references"});
      take(j["labels"], "references", c.labels.references);
    }
    if (j.contains("loss")) {
      const auto& o = j["loss"];
      check_keys(o, "loss", {"m_p", "m_n", "lambda_d"});
      take(o, "m_p", c.loss.m_p);
      take(o, "m_n", c.loss.m_n);
      take(o, "lambda_d", c.loss.lambda_d);
    }
    if (j.contains("losscheck")) {
      const auto& o = j["losscheck"];
      check_keys(o, "losscheck", {"instances", "descriptor_dim", "step", "max_rel_error"});
      take(o, "instances", c.losscheck.instances);
      take(o, "descriptor_dim", c.losscheck.descriptor_dim);
      take(o, "step", c.losscheck.step);
      take(o, "max_rel_error", c.losscheck.max_rel_error);
    }
    if (j.contains("frontend")) {
      const auto& o = j["frontend"];
      check_keys(o, "frontend", {"top_k", "nms_radius", "threshold", "descriptor_dim"});
      take(o, "top_k", c.frontend.top_k);
      take(o, "nms_radius", c.frontend.nms_radius);
      take(o, "threshold", c.frontend.threshold);
      take(o, "descriptor_dim", c.frontend.descriptor_dim);
    }
    if (j.contains("eval")) {
      const auto& e = j["eval"];
      check_keys(e, "eval", {"homography", "pose", "register"});
      if (e.contains("homography")) {
        const auto& o = e["homography"];
        check_keys(o, "eval.homography",
                   {"pairs", "max_corner_shift", "thresholds", "ransac_threshold_px", "ransac_iterations"});
        take(o, "pairs", c.homography.pairs);
        take(o, "max_corner_shift", c.homography.max_corner_shift);
        take(o, "thresholds", c.homography.thresholds);
        take(o, "ransac_threshold_px", c.homography.ransac_threshold_px);
        take(o, "ransac_iterations", c.homography.ransac_iterations);
      }
      if (e.contains("pose")) {
        const auto& o = e["pose"];
        check_keys(o, "eval.pose",
                   {"pairs", "min_offset", "max_offset", "auc_thresholds", "split_threshold", "ransac_threshold_px",
                    "ransac_iterations"});
        take(o, "pairs", c.pose.pairs);
        take(o, "min_offset", c.pose.min_offset);
        take(o, "max_offset", c.pose.max_offset);
        take(o, "auc_thresholds", c.pose.auc_thresholds);
        take(o, "split_threshold", c.pose.split_threshold);
        take(o, "ransac_threshold_px", c.pose.ransac_threshold_px);
        take(o, "ransac_iterations", c.pose.ransac_iterations);
      }
      if (e.contains("register")) {
        const auto& o = e["register"];
        auto& r = c.registration;
        check_keys(o, "eval.register",
                   {"pairs", "min_offset", "max_offset", "grid_stride", "descriptor_dim", "ratio", "ransac_iterations",
                    "inlier_threshold_m", "chamfer_stride", "refit_rounds", "subpixel", "subpixel_depth_spread",
                    "rotation_thresholds_deg", "translation_thresholds_cm",
                    "chamfer_thresholds_cm"});
        take(o, "pairs", r.pairs);
        take(o, "min_offset", r.min_offset);
        take(o, "max_offset", r.max_offset);
        take(o, "grid_stride", r.options.grid_stride);
        take(o, "descriptor_dim", r.options.descriptor_dim);
        take(o, "ratio", r.options.ratio);
        take(o, "ransac_iterations", r.options.ransac_iterations);
        take(o, "inlier_threshold_m", r.options.inlier_threshold_m);
        take(o, "chamfer_stride", r.options.chamfer_stride);
        take(o, "refit_rounds", r.options.refit_rounds);
        take(o, "subpixel", r.options.subpixel);
        take(o, "subpixel_depth_spread", r.options.subpixel_depth_spread);
        take(o, "rotation_thresholds_deg", r.rotation_thresholds_deg);
        take(o, "translation_thresholds_cm", r.translation_thresholds_cm);
        take(o, "chamfer_thresholds_cm", r.chamfer_thresholds_cm);
      }
    }
  } catch (const json::exception& ex) {
    throw InvalidSpecError(std::string("malformed config: ") + ex.what());
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidSpecError("cannot open config '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    throw InvalidSpecError("config '" + path.string() + "' is not valid JSON: " + ex.what());
  }
  return config_from_json(j);
}

std::string config_hash(const RunConfig& c) {
  const std::string dump = to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : dump) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace prp
