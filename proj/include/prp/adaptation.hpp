#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "prp/geometry.hpp"

namespace prp {

struct PixelPoint {
  int x = 0;
  int y = 0;
  float score = 0.0f;
  bool operator==(const PixelPoint&) const = default;
};

/// Greedy non-maximum suppression. Candidates are pixels with score >= threshold and score > 0,
/// visited by descending score (ties in row-major order); a candidate is kept unless an already
/// kept point lies within Chebyshev distance radius. Output is in selection order.
std::vector<PixelPoint> nms(const Heatmap& heatmap, int radius, double threshold);

enum class Aggregation { kMax, kMean, kSum };

struct AdaptationParams {
  int window_len = 20;
  int n_sampled = 14;
  int patch = 3;
  int nms_radius = 4;
  double threshold = 0.015;
  Aggregation aggregation = Aggregation::kMax;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PseudoLabels {
  int frame = 0;
  std::vector<PixelPoint> points;
};

using Detector = std::function<Heatmap(const RgbImage&)>;

/// Transfers the patch x patch neighbourhood of every NMS detection of a sampled view onto the
/// reference frame. Pixels no detection lands on stay zero.
Heatmap transfer_mask(const RenderedView& sampled, const Heatmap& sampled_heatmap, const RenderedView& reference,
                      const AdaptationParams& params, const PrPParams& prp);

/// Combines the reference heatmap with the transferred masks.
Heatmap aggregate(const Heatmap& reference, const std::vector<Heatmap>& masks, Aggregation mode);

/// Window members used for reference frame `reference`: n_sampled distinct frames drawn from
/// reference+1 .. reference+window_len-1, sorted. Depends only on (seed, reference).
std::vector<int> sample_window(int reference, const AdaptationParams& params);

/// Pseudo labels for one reference frame given precomputed heatmaps for the whole sequence.
/// Throws EmptySceneError when the window runs past the end of the sequence.
PseudoLabels adapt_reference(const std::vector<RenderedView>& views, const std::vector<Heatmap>& heatmaps,
                             int reference, const AdaptationParams& params, const PrPParams& prp);

/// Runs the detector on every frame, then labels the given reference frames in parallel.
/// An empty reference list means every frame that has a full window ahead of it.
std::vector<PseudoLabels> projective_adaptation(const std::vector<RenderedView>& views, const Detector& detector,
                                                const AdaptationParams& params, const PrPParams& prp,
                                                std::vector<int> references = {});

/// "frame_idx x y" per line.
void write_labels(const std::vector<PseudoLabels>& labels, const std::filesystem::path& path);
std::vector<PseudoLabels> read_labels(const std::filesystem::path& path);

}  // namespace prp
