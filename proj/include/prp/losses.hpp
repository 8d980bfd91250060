#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "prp/adaptation.hpp"
#include "prp/correspondence.hpp"

namespace prp {

/// One D-dimensional descriptor per cell; row index h * wc + w.
struct DescriptorGrid {
  int hc = 0;
  int wc = 0;
  Eigen::MatrixXd data;

  DescriptorGrid() = default;
  DescriptorGrid(int hc_, int wc_, int dim) : hc(hc_), wc(wc_), data(Eigen::MatrixXd::Zero(hc_ * wc_, dim)) {}

  int cells() const { return hc * wc; }
  int dim() const { return static_cast<int>(data.cols()); }
  int index(int h, int w) const { return h * wc + w; }

  void normalize();
  bool is_normalized(double tol = 1e-6) const;
};

struct DescriptorLossParams {
  double m_p = 1.0;
  double m_n = 0.2;
  double lambda_d = 250.0;

  void validate() const;
};

/// lambda_d * s * max(0, m_p - x) + (1 - s) * max(0, x - m_n) with x = d^T d'.
double hinge_term(const Eigen::Ref<const Eigen::VectorXd>& d, const Eigen::Ref<const Eigen::VectorXd>& d2, bool s,
                  const DescriptorLossParams& params);

struct DescriptorLossResult {
  double loss = 0.0;
  Eigen::MatrixXd grad_a;  // same layout as the first grid
  Eigen::MatrixXd grad_b;
};

/// Mean hinge over all cell pairs, normalised by 1/(cells_a * cells_b), with its exact gradient.
/// Descriptors are treated as free vectors; renormalisation is the caller's business.
/// Throws ShapeError when the grids disagree with each other or with S.
DescriptorLossResult descriptor_loss(const DescriptorGrid& a, const DescriptorGrid& b, const CellCorrespondence& s,
                                     const DescriptorLossParams& params);

constexpr int kCellClasses = 64;
constexpr int kDustbin = 64;  // zero-based index of the 65th class

/// hc x wc cells, 65 raw scores each (64 in-cell positions + dustbin). Row index h * wc + w.
struct DetectorLogits {
  int hc = 0;
  int wc = 0;
  Eigen::MatrixXd data;

  DetectorLogits() = default;
  DetectorLogits(int hc_, int wc_) : hc(hc_), wc(wc_), data(Eigen::MatrixXd::Zero(hc_ * wc_, kCellClasses + 1)) {}
};

/// Target class per cell for 8x8 cells. Multiple labels in one cell resolve to the smallest (y, x).
/// Throws ShapeError for labels outside the grid.
std::vector<int> detector_targets(int hc, int wc, const std::vector<PixelPoint>& labels);

struct DetectorLossResult {
  double loss = 0.0;
  Eigen::MatrixXd grad;
};

/// Mean softmax cross-entropy over cells; gradient (softmax - onehot) / cells.
DetectorLossResult detector_loss(const DetectorLogits& logits, const std::vector<PixelPoint>& labels);

struct GradientCheckReport {
  int instances = 0;
  double descriptor_max_rel_error = 0.0;
  double detector_max_rel_error = 0.0;
};

/// Central finite differences against the analytic gradients on random small instances.
GradientCheckReport run_gradient_check(int instances, std::uint64_t seed, const DescriptorLossParams& params, int dim,
                                       double step = 1e-4);

}  // namespace prp
