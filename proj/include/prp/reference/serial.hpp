#pragma once

// Single-threaded, loop-for-loop versions of the parallel kernels. Tests compare against
// them and the benchmark times both.

#include <optional>
#include <vector>

#include "prp/adaptation.hpp"
#include "prp/correspondence.hpp"
#include "prp/frontend.hpp"
#include "prp/losses.hpp"
#include "prp/scene.hpp"

namespace prp::serial {

RenderedView render_view(const SceneSpec& scene, const CameraIntrinsics& cam, const PoseSE3& pose, int frame_index = 0);

CorrespondenceMap dense_correspondences(const RenderedView& src, const RenderedView& dst, const PrPParams& params);

/// Every (src cell, dst cell) pair tested directly.
CellCorrespondence cell_correspondence_prp(const RenderedView& src, const RenderedView& dst, int cell, double eps_s,
                                           const PrPParams& params);
CellCorrespondence cell_correspondence_homography(const Mat3& homography, int src_width, int src_height,
                                                  int dst_width, int dst_height, int cell, double eps_s);

/// Corner response computed pixel by pixel straight from the grey image.
Heatmap detect(const GrayImage& image);

/// Greedy NMS by repeated arg-max over the remaining candidates.
std::vector<PixelPoint> nms(const Heatmap& heatmap, int radius, double threshold);

/// All-pairs mutual nearest neighbours with explicit dot products.
std::vector<IndexMatch> match_mnn(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                  std::optional<double> ratio = std::nullopt);

/// Nested-loop loss and gradient.
DescriptorLossResult descriptor_loss(const DescriptorGrid& a, const DescriptorGrid& b, const CellCorrespondence& s,
                                     const DescriptorLossParams& params);

}  // namespace prp::serial
