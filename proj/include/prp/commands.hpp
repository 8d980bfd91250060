#pragma once

#include <filesystem>
#include <string>

#include "prp/config.hpp"
#include "prp/metrics.hpp"

namespace prp {

enum class EvalTask { kHomography, kPose, kRegister };

/// Throws InvalidSpecError for anything but homography, pose or register.
EvalTask parse_eval_task(const std::string& name);

/// Top-level report carrying the config echo, its hash and the seed.
MetricsReport make_report(const std::string& name, const RunConfig& config);

/// report.json and report.csv in dir.
void write_report(const MetricsReport& report, const std::filesystem::path& dir);

/// Renders the trajectory and writes the dataset into config.output_dir.
MetricsReport cmd_synth(const RunConfig& config);

/// Samples training pairs and writes pairs.txt plus per-pair cell (and optionally dense) correspondences.
MetricsReport cmd_pairs(const RunConfig& config);

/// Projective Adaptation pseudo labels for evenly spread reference frames, written to labels.txt.
MetricsReport cmd_labels(const RunConfig& config);

MetricsReport cmd_eval(const RunConfig& config, EvalTask task);

/// Finite-difference gradient check of both losses. The report's "passed" metric is 1 or 0.
MetricsReport cmd_losscheck(const RunConfig& config);

}  // namespace prp
