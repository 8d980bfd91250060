#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "prp/adaptation.hpp"
#include "prp/correspondence.hpp"
#include "prp/losses.hpp"
#include "prp/registration.hpp"
#include "prp/scene.hpp"

namespace prp {

struct CameraConfig {
  int width = 160;
  int height = 120;
  double hfov_deg = 44.0;

  CameraIntrinsics intrinsics() const { return CameraIntrinsics::from_hfov(hfov_deg, width, height); }
};

struct PairsConfig {
  int count = 8;
  int cell = 8;
  double eps_s_prp = 4.0;
  double eps_s_homography = 8.0;
  bool write_dense = true;
};

struct LabelsConfig {
  int references = 4;  // labelled frames, spread evenly over the admissible range
};

struct LossCheckConfig {
  int instances = 100;
  int descriptor_dim = 16;
  double step = 1e-4;
  double max_rel_error = 1e-3;
};

struct FrontendConfig {
  int top_k = 1000;
  int nms_radius = 4;
  double threshold = 0.0;
  int descriptor_dim = 128;
};

struct HomographyEvalConfig {
  int pairs = 10;
  double max_corner_shift = 0.15;  // fraction of the image size
  std::vector<double> thresholds{3.0, 5.0};
  double ransac_threshold_px = 3.0;
  int ransac_iterations = 1000;
};

struct PoseEvalConfig {
  int pairs = 20;
  int min_offset = 4;
  int max_offset = 40;
  std::vector<double> auc_thresholds{5.0, 10.0, 20.0};
  double split_threshold = 0.15;
  double ransac_threshold_px = 0.5;  // over the mean focal length
  int ransac_iterations = 1000;
};

struct RegisterEvalConfig {
  int pairs = 4;
  int min_offset = 1;
  int max_offset = 6;
  RegistrationOptions options;
  std::vector<double> rotation_thresholds_deg{5.0, 10.0, 45.0};
  std::vector<double> translation_thresholds_cm{5.0, 10.0, 25.0};
  std::vector<double> chamfer_thresholds_cm{1.0, 5.0, 10.0};
};

struct RunConfig {
  std::string scene_path;  // empty: built-in scene
  std::string dataset_dir = "dataset";
  std::string output_dir = "out";
  std::uint64_t seed = 0;

  CameraConfig camera;
  TrajectorySpec trajectory;
  PrPParams prp;
  PairSamplingParams sampling;
  PairsConfig pairs;
  AdaptationParams adaptation;
  LabelsConfig labels;
  DescriptorLossParams loss;
  LossCheckConfig losscheck;
  FrontendConfig frontend;
  HomographyEvalConfig homography;
  PoseEvalConfig pose;
  RegisterEvalConfig registration;

  /// Numeric invariants of every owned type. Throws InvalidSpecError.
  void validate() const;
  /// Throws InvalidSpecError when a referenced input path is missing.
  void validate_paths(bool needs_dataset) const;

  SceneSpec scene() const;
};

RunConfig default_config();

nlohmann::json to_json(const RunConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

/// FNV-1a 64 of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const RunConfig& c);

/// Independent stream seed for one pipeline stage.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

}  // namespace prp
