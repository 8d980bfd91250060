#include <gtest/gtest.h>

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <random>

#include "prp/errors.hpp"
#include "prp/losses.hpp"
#include "prp/reference/serial.hpp"
#include "support.hpp"

namespace prp {
namespace {

DescriptorGrid random_grid(std::mt19937_64& rng, int hc, int wc, int dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  DescriptorGrid d(hc, wc, dim);
  for (int i = 0; i < d.data.size(); ++i) d.data.data()[i] = g(rng);
  d.normalize();
  return d;
}

CellCorrespondence random_s(std::mt19937_64& rng, int hc, int wc, int hc2, int wc2, double density) {
  CellCorrespondence s;
  s.src_hc = hc;
  s.src_wc = wc;
  s.dst_hc = hc2;
  s.dst_wc = wc2;
  std::bernoulli_distribution on(density);
  for (int h = 0; h < hc; ++h)
    for (int w = 0; w < wc; ++w)
      for (int h2 = 0; h2 < hc2; ++h2)
        for (int w2 = 0; w2 < wc2; ++w2)
          if (on(rng)) s.positives.push_back({h, w, h2, w2});
  return s;
}

CellCorrespondence transposed(const CellCorrespondence& s) {
  CellCorrespondence t = s;
  std::swap(t.src_hc, t.dst_hc);
  std::swap(t.src_wc, t.dst_wc);
  t.positives.clear();
  for (const auto& q : s.positives) t.positives.push_back({q[2], q[3], q[0], q[1]});
  std::sort(t.positives.begin(), t.positives.end());
  return t;
}

test::PositiveSet as_set(const CellCorrespondence& s) { return {s.positives.begin(), s.positives.end()}; }

// Resamples until no pair sits within `gap` of a hinge kink.
void push_off_kinks(std::mt19937_64& rng, DescriptorGrid& a, DescriptorGrid& b, const DescriptorLossParams& p,
                    double gap) {
  for (;;) {
    const Eigen::MatrixXd dots = a.data * b.data.transpose();
    const bool near = (dots.array() - p.m_p).abs().minCoeff() < gap || (dots.array() - p.m_n).abs().minCoeff() < gap;
    if (!near) return;
    a = random_grid(rng, a.hc, a.wc, a.dim());
    b = random_grid(rng, b.hc, b.wc, b.dim());
  }
}

double rel_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

TEST(Hinge, Examples) {
  const DescriptorLossParams p;
  Eigen::VectorXd d(3), e(3);
  d << 1, 0, 0;
  e << 0, 1, 0;
  EXPECT_EQ(hinge_term(d, d, true, p), 0.0);
  EXPECT_NEAR(hinge_term(d, d, false, p), 0.8, 1e-15);
  EXPECT_EQ(hinge_term(d, e, false, p), 0.0);
  EXPECT_DOUBLE_EQ(hinge_term(d, e, true, p), 250.0);
  Eigen::VectorXd f(3);
  f << 0.6, 0.8, 0.0;
  EXPECT_NEAR(hinge_term(d, f, true, p), 250.0 * 0.4, 1e-12);
  EXPECT_NEAR(hinge_term(d, f, false, p), 0.4, 1e-12);
}

TEST(DescriptorLoss, IdenticalCellsAllPositiveIsZero) {
  std::mt19937_64 rng(0);
  DescriptorGrid a(3, 4, 8);
  a.data.col(2).setOnes();
  CellCorrespondence s = random_s(rng, 3, 4, 3, 4, 1.0);
  EXPECT_EQ(descriptor_loss(a, a, s, DescriptorLossParams{}).loss, 0.0);
}

TEST(DescriptorLoss, IdenticalCellsAllNegativeIsExactlyPointEight) {
  std::mt19937_64 rng(0);
  DescriptorGrid a(5, 7, 16);
  a.data.col(0).setOnes();
  CellCorrespondence s = random_s(rng, 5, 7, 5, 7, 0.0);
  const DescriptorLossResult r = descriptor_loss(a, a, s, DescriptorLossParams{});
  EXPECT_EQ(r.loss, 0.8);
  EXPECT_NEAR(serial::descriptor_loss(a, a, s, DescriptorLossParams{}).loss, 0.8, 1e-12);
}

TEST(DescriptorLoss, MatchesLongDoubleOracle) {
  std::mt19937_64 rng(1);
  for (const int dim : {4, 16, 64}) {
    for (int trial = 0; trial < 5; ++trial) {
      const DescriptorGrid a = random_grid(rng, 3, 4, dim), b = random_grid(rng, 4, 3, dim);
      const CellCorrespondence s = random_s(rng, 3, 4, 4, 3, 0.1);
      const DescriptorLossParams p;
      const double got = descriptor_loss(a, b, s, p).loss;
      const long double want = test::oracle_descriptor_loss(a.data, a.wc, b.data, b.wc, as_set(s), p);
      EXPECT_NEAR(got, static_cast<double>(want), 1e-12 * std::max(1.0, std::abs(static_cast<double>(want))));
    }
  }
}

TEST(DescriptorLoss, ZeroExactlyWhenMarginsHold) {
  DescriptorGrid a(2, 2, 8), b(2, 2, 8);
  for (int i = 0; i < 4; ++i) {
    a.data(i, i) = 1.0;
    b.data(i, i) = 1.0;
  }
  CellCorrespondence s;
  s.src_hc = s.src_wc = s.dst_hc = s.dst_wc = 2;
  s.positives = {{0, 0, 0, 0}, {0, 1, 0, 1}, {1, 0, 1, 0}, {1, 1, 1, 1}};
  EXPECT_EQ(descriptor_loss(a, b, s, DescriptorLossParams{}).loss, 0.0);
  b.data.row(3) << 0, 0, 0.3, 0.0, 0, 0, 0, std::sqrt(1 - 0.09);
  EXPECT_GT(descriptor_loss(a, b, s, DescriptorLossParams{}).loss, 0.0);
}

TEST(DescriptorLoss, NeverNegative) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const DescriptorGrid a = random_grid(rng, 2, 3, 4), b = random_grid(rng, 3, 2, 4);
    EXPECT_GE(descriptor_loss(a, b, random_s(rng, 2, 3, 3, 2, 0.3), DescriptorLossParams{}).loss, 0.0);
  }
}

TEST(DescriptorLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  const DescriptorLossParams p;
  const double h = 1e-4;
  for (const int dim : {4, 16}) {
    DescriptorGrid a = random_grid(rng, 4, 4, dim), b = random_grid(rng, 4, 4, dim);
    push_off_kinks(rng, a, b, p, 10 * h);
    const CellCorrespondence s = random_s(rng, 4, 4, 4, 4, 0.1);
    const DescriptorLossResult r = descriptor_loss(a, b, s, p);
    double worst = 0.0;
    for (int k = 0; k < a.data.size(); ++k) {
      DescriptorGrid ap = a, am = a;
      ap.data.data()[k] += h;
      am.data.data()[k] -= h;
      const double fd = (descriptor_loss(ap, b, s, p).loss - descriptor_loss(am, b, s, p).loss) / (2 * h);
      worst = std::max(worst, rel_error(r.grad_a.data()[k], fd));
    }
    for (int k = 0; k < b.data.size(); ++k) {
      DescriptorGrid bp = b, bm = b;
      bp.data.data()[k] += h;
      bm.data.data()[k] -= h;
      const double fd = (descriptor_loss(a, bp, s, p).loss - descriptor_loss(a, bm, s, p).loss) / (2 * h);
      worst = std::max(worst, rel_error(r.grad_b.data()[k], fd));
    }
    EXPECT_LT(worst, 1e-4) << dim;
  }
}

TEST(DescriptorLoss, SwappingGridsAndTransposingSKeepsLoss) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const DescriptorGrid a = random_grid(rng, 3, 5, 16), b = random_grid(rng, 4, 2, 16);
    const CellCorrespondence s = random_s(rng, 3, 5, 4, 2, 0.15);
    const DescriptorLossParams p;
    const DescriptorLossResult ab = descriptor_loss(a, b, s, p);
    const DescriptorLossResult ba = descriptor_loss(b, a, transposed(s), p);
    EXPECT_NEAR(ab.loss, ba.loss, 1e-12);
    EXPECT_LT((ab.grad_a - ba.grad_b).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((ab.grad_b - ba.grad_a).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(DescriptorLoss, InvariantToGlobalRotation) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    const DescriptorGrid a = random_grid(rng, 3, 3, 16), b = random_grid(rng, 3, 3, 16);
    Eigen::MatrixXd m(16, 16);
    for (int i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(m).householderQ();
    DescriptorGrid ar = a, br = b;
    ar.data = a.data * q;
    br.data = b.data * q;
    const CellCorrespondence s = random_s(rng, 3, 3, 3, 3, 0.2);
    EXPECT_NEAR(descriptor_loss(a, b, s, DescriptorLossParams{}).loss,
                descriptor_loss(ar, br, s, DescriptorLossParams{}).loss, 1e-10);
  }
}

TEST(DescriptorLoss, SerialReferenceAndRepeatRunsAgree) {
  std::mt19937_64 rng(6);
  const DescriptorGrid a = random_grid(rng, 6, 8, 64), b = random_grid(rng, 6, 8, 64);
  const CellCorrespondence s = random_s(rng, 6, 8, 6, 8, 0.05);
  const DescriptorLossResult r1 = descriptor_loss(a, b, s, DescriptorLossParams{});
  const DescriptorLossResult r2 = descriptor_loss(a, b, s, DescriptorLossParams{});
  const DescriptorLossResult ref = serial::descriptor_loss(a, b, s, DescriptorLossParams{});
  EXPECT_EQ(r1.loss, r2.loss);
  EXPECT_EQ(r1.grad_a, r2.grad_a);
  EXPECT_NEAR(r1.loss, ref.loss, 1e-12);
  EXPECT_LT((r1.grad_a - ref.grad_a).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((r1.grad_b - ref.grad_b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DescriptorLoss, ShapeErrors) {
  std::mt19937_64 rng(7);
  const DescriptorGrid a = random_grid(rng, 2, 2, 4), b = random_grid(rng, 2, 2, 8);
  EXPECT_THROW(descriptor_loss(a, b, random_s(rng, 2, 2, 2, 2, 0.5), DescriptorLossParams{}), ShapeError);
  EXPECT_THROW(descriptor_loss(a, a, random_s(rng, 2, 3, 2, 2, 0.5), DescriptorLossParams{}), ShapeError);
}

TEST(DescriptorLoss, ParamValidation) {
  DescriptorLossParams p;
  p.m_n = 1.0;
  EXPECT_THROW(p.validate(), InvalidSpecError);
  p = DescriptorLossParams{};
  p.lambda_d = 0.0;
  EXPECT_THROW(p.validate(), InvalidSpecError);
}

TEST(DescriptorGrid, NormalizeGivesUnitRows) {
  std::mt19937_64 rng(8);
  DescriptorGrid d = random_grid(rng, 3, 3, 16);
  EXPECT_TRUE(d.is_normalized());
  d.data(0, 0) += 0.1;
  EXPECT_FALSE(d.is_normalized());
}

TEST(DetectorTargets, OffsetsAndDustbin) {
  const std::vector<int> t = detector_targets(2, 3, {{10, 3, 1.0f}, {23, 15, 1.0f}});
  ASSERT_EQ(t.size(), 6u);
  EXPECT_EQ(t[1], 3 * 8 + 2);
  EXPECT_EQ(t[5], 7 * 8 + 7);
  EXPECT_EQ(t[0], kDustbin);
  EXPECT_EQ(kDustbin, 64);
  EXPECT_THROW(detector_targets(2, 3, {{24, 0, 1.0f}}), ShapeError);
}

TEST(DetectorTargets, CrowdedCellTakesSmallestRowMajor) {
  const std::vector<int> t = detector_targets(1, 1, {{6, 5, 1.0f}, {2, 5, 0.1f}, {7, 1, 0.2f}});
  EXPECT_EQ(t[0], 1 * 8 + 7);
}

TEST(DetectorLoss, UniformLogitsGiveLogSixtyFive) {
  const DetectorLogits x(3, 4);
  const DetectorLossResult r = detector_loss(x, {{1, 1, 1.0f}});
  EXPECT_NEAR(r.loss, std::log(65.0), 1e-12);
}

TEST(DetectorLoss, ConfidentCorrectLogitsGiveZero) {
  DetectorLogits x(2, 2);
  const std::vector<PixelPoint> labels = {{3, 4, 1.0f}, {12, 9, 1.0f}};
  const std::vector<int> t = detector_targets(2, 2, labels);
  for (int i = 0; i < 4; ++i) x.data(i, t[static_cast<std::size_t>(i)]) = 60.0;
  EXPECT_LT(detector_loss(x, labels).loss, 1e-20);
}

TEST(DetectorLoss, MatchesOracleAndFiniteDifferences) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 2.0);
  DetectorLogits x(1, 1);
  for (int k = 0; k < x.data.size(); ++k) x.data.data()[k] = g(rng);
  const std::vector<PixelPoint> labels = {{5, 2, 1.0f}};
  const DetectorLossResult r = detector_loss(x, labels);
  EXPECT_NEAR(r.loss, static_cast<double>(test::oracle_detector_loss(x.data, detector_targets(1, 1, labels))), 1e-12);
  // Five-point stencil: truncation O(h^4) keeps tiny softmax entries resolvable.
  const double h = 1e-3;
  double worst = 0.0;
  for (int k = 0; k < x.data.size(); ++k) {
    auto at = [&](double delta) {
      DetectorLogits xs = x;
      xs.data.data()[k] += delta;
      return detector_loss(xs, labels).loss;
    };
    const double fd = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
    worst = std::max(worst, rel_error(r.grad.data()[k], fd));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(DetectorLoss, LargerGridMatchesOracle) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g(0.0, 3.0);
  DetectorLogits x(4, 5);
  for (int k = 0; k < x.data.size(); ++k) x.data.data()[k] = g(rng);
  const std::vector<PixelPoint> labels = {{0, 0, 1.0f}, {17, 30, 1.0f}, {39, 31, 1.0f}, {18, 30, 0.5f}};
  const DetectorLossResult r = detector_loss(x, labels);
  EXPECT_NEAR(r.loss, static_cast<double>(test::oracle_detector_loss(x.data, detector_targets(4, 5, labels))), 1e-12);
  // Each gradient row sums to zero: softmax minus a one-hot.
  EXPECT_LT(r.grad.rowwise().sum().cwiseAbs().maxCoeff(), 1e-15);
}

TEST(GradientCheck, LibraryReportIsTight) {
  const GradientCheckReport rep = run_gradient_check(5, 11, DescriptorLossParams{}, 16);
  EXPECT_EQ(rep.instances, 5);
  EXPECT_LT(rep.descriptor_max_rel_error, 1e-4);
  EXPECT_LT(rep.detector_max_rel_error, 1e-4);
}

}  // namespace
}  // namespace prp
