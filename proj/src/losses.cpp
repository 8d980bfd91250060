#include "prp/losses.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "prp/errors.hpp"

namespace prp {

namespace {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace

void DescriptorGrid::normalize() {
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const double n = data.row(i).norm();
    if (n > 0.0) data.row(i) /= n;
  }
}

bool DescriptorGrid::is_normalized(double tol) const {
  for (Eigen::Index i = 0; i < data.rows(); ++i)
    if (std::abs(data.row(i).norm() - 1.0) > tol) return false;
  return true;
}

void DescriptorLossParams::validate() const {
  if (!(m_n >= 0.0 && m_n < m_p && m_p <= 1.0)) throw InvalidSpecError("need 0 <= m_n < m_p <= 1");
  if (!(lambda_d > 0.0)) throw InvalidSpecError("lambda_d must be positive");
}

double hinge_term(const Eigen::Ref<const Eigen::VectorXd>& d, const Eigen::Ref<const Eigen::VectorXd>& d2, bool s,
                  const DescriptorLossParams& params) {
  const double x = d.dot(d2);
  return s ? params.lambda_d * std::max(0.0, params.m_p - x) : std::max(0.0, x - params.m_n);
}

DescriptorLossResult descriptor_loss(const DescriptorGrid& a, const DescriptorGrid& b, const CellCorrespondence& s,
                                     const DescriptorLossParams& params) {
  params.validate();
  if (a.dim() != b.dim()) throw ShapeError("descriptor grids have different dimensions");
  if (a.hc != s.src_hc || a.wc != s.src_wc || b.hc != s.dst_hc || b.wc != s.dst_wc)
    throw ShapeError("descriptor grids do not match the correspondence indicator");
  const int n = a.cells(), m = b.cells();
  if (n == 0 || m == 0) throw ShapeError("descriptor grids are empty");

  // Row i of S as a contiguous slice of the sorted positives.
  std::vector<std::size_t> row_begin(static_cast<std::size_t>(n) + 1, 0);
  for (const auto& q : s.positives) ++row_begin[static_cast<std::size_t>(a.index(q[0], q[1])) + 1];
  for (int i = 0; i < n; ++i) row_begin[static_cast<std::size_t>(i) + 1] += row_begin[static_cast<std::size_t>(i)];

  const Eigen::MatrixXd dots = a.data * b.data.transpose();
  Eigen::MatrixXd coeff(n, m);  // d loss / d dot, before normalisation
  std::vector<double> row_loss(static_cast<std::size_t>(n), 0.0);

#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    std::size_t k = row_begin[static_cast<std::size_t>(i)];
    const std::size_t end = row_begin[static_cast<std::size_t>(i) + 1];
    CompensatedSum acc;
    for (int j = 0; j < m; ++j) {
      bool positive = false;
      if (k < end) {
        const auto& q = s.positives[k];
        if (b.index(q[2], q[3]) == j) {
          positive = true;
          ++k;
        }
      }
      const double x = dots(i, j);
      if (positive) {
        const double gap = params.m_p - x;
        acc.add(params.lambda_d * std::max(0.0, gap));
        coeff(i, j) = gap > 0.0 ? -params.lambda_d : 0.0;
      } else {
        const double gap = x - params.m_n;
        acc.add(std::max(0.0, gap));
        coeff(i, j) = gap > 0.0 ? 1.0 : 0.0;
      }
    }
    row_loss[static_cast<std::size_t>(i)] = acc.value();
  }

  const double norm = 1.0 / (static_cast<double>(n) * static_cast<double>(m));
  DescriptorLossResult out;
  CompensatedSum total;
  for (const double r : row_loss) total.add(r);
  out.loss = total.value() / (static_cast<double>(n) * static_cast<double>(m));
  out.grad_a = norm * (coeff * b.data);
  out.grad_b = norm * (coeff.transpose() * a.data);
  return out;
}

std::vector<int> detector_targets(int hc, int wc, const std::vector<PixelPoint>& labels) {
  std::vector<int> target(static_cast<std::size_t>(hc * wc), kDustbin);
  std::vector<std::pair<int, int>> best(target.size(), {-1, -1});  // (y, x) of the chosen label
  for (const auto& p : labels) {
    if (p.x < 0 || p.y < 0 || p.x >= 8 * wc || p.y >= 8 * hc)
      throw ShapeError("label (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ") outside the cell grid");
    const auto c = static_cast<std::size_t>((p.y / 8) * wc + p.x / 8);
    const std::pair<int, int> key{p.y, p.x};
    if (best[c].first < 0 || key < best[c]) {
      best[c] = key;
      target[c] = (p.y % 8) * 8 + (p.x % 8);
    }
  }
  return target;
}

DetectorLossResult detector_loss(const DetectorLogits& logits, const std::vector<PixelPoint>& labels) {
  if (logits.data.rows() != logits.hc * logits.wc || logits.data.cols() != kCellClasses + 1)
    throw ShapeError("detector logits must be (hc*wc) x 65");
  const std::vector<int> target = detector_targets(logits.hc, logits.wc, labels);
  const int n = logits.hc * logits.wc;
  DetectorLossResult out;
  out.grad.resize(n, kCellClasses + 1);
  std::vector<double> cell_loss(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const auto row = logits.data.row(i);
    const double mx = row.maxCoeff();
    const Eigen::RowVectorXd e = (row.array() - mx).exp().matrix();
    const double z = e.sum();
    const int t = target[static_cast<std::size_t>(i)];
    cell_loss[static_cast<std::size_t>(i)] = -(row(t) - mx - std::log(z));
    out.grad.row(i) = e / z;
    out.grad(i, t) -= 1.0;
  }
  CompensatedSum total;
  for (const double l : cell_loss) total.add(l);
  out.loss = total.value() / n;
  out.grad /= n;
  return out;
}

namespace {

double rel_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-10});
  return std::abs(analytic - numeric) / denom;
}

/// True when every dot product sits clear of its hinge kink.
bool off_kinks(const DescriptorGrid& a, const DescriptorGrid& b, const CellCorrespondence& s,
               const DescriptorLossParams& params, double margin) {
  const Eigen::MatrixXd dots = a.data * b.data.transpose();
  for (int i = 0; i < a.cells(); ++i)
    for (int j = 0; j < b.cells(); ++j) {
      const bool pos = s.contains({i / a.wc, i % a.wc, j / b.wc, j % b.wc});
      const double kink = pos ? params.m_p : params.m_n;
      if (std::abs(dots(i, j) - kink) < margin) return false;
    }
  return true;
}

}  // namespace

GradientCheckReport run_gradient_check(int instances, std::uint64_t seed, const DescriptorLossParams& params, int dim,
                                       double step) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution coin(0.2);
  GradientCheckReport rep;
  rep.instances = instances;
  for (int it = 0; it < instances; ++it) {
    // Descriptor loss on 4x4 vs 4x4 cell grids.
    DescriptorGrid a(4, 4, dim), b(4, 4, dim);
    CellCorrespondence s;
    s.src_hc = s.src_wc = s.dst_hc = s.dst_wc = 4;
    do {
      for (Eigen::Index k = 0; k < a.data.size(); ++k) a.data.data()[k] = gauss(rng);
      for (Eigen::Index k = 0; k < b.data.size(); ++k) b.data.data()[k] = gauss(rng);
      a.normalize();
      b.normalize();
      s.positives.clear();
      for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j)
          if (coin(rng)) s.positives.push_back({i / 4, i % 4, j / 4, j % 4});
    } while (!off_kinks(a, b, s, params, 1e-3));
    const DescriptorLossResult res = descriptor_loss(a, b, s, params);
    for (int side = 0; side < 2; ++side) {
      DescriptorGrid& g = side == 0 ? a : b;
      const Eigen::MatrixXd& analytic = side == 0 ? res.grad_a : res.grad_b;
      for (Eigen::Index k = 0; k < g.data.size(); ++k) {
        const double orig = g.data.data()[k];
        g.data.data()[k] = orig + step;
        const double up = descriptor_loss(a, b, s, params).loss;
        g.data.data()[k] = orig - step;
        const double down = descriptor_loss(a, b, s, params).loss;
        g.data.data()[k] = orig;
        rep.descriptor_max_rel_error =
            std::max(rep.descriptor_max_rel_error, rel_error(analytic.data()[k], (up - down) / (2.0 * step)));
      }
    }

    // Detector loss on a single 8x8 cell.
    DetectorLogits x(1, 1);
    for (Eigen::Index k = 0; k < x.data.size(); ++k) x.data.data()[k] = gauss(rng);
    std::vector<PixelPoint> labels;
    if (!coin(rng)) labels.push_back({static_cast<int>(rng() % 8), static_cast<int>(rng() % 8), 1.0f});
    const DetectorLossResult dres = detector_loss(x, labels);
    for (Eigen::Index k = 0; k < x.data.size(); ++k) {
      const double orig = x.data.data()[k];
      x.data.data()[k] = orig + step;
      const double up = detector_loss(x, labels).loss;
      x.data.data()[k] = orig - step;
      const double down = detector_loss(x, labels).loss;
      x.data.data()[k] = orig;
      rep.detector_max_rel_error =
          std::max(rep.detector_max_rel_error, rel_error(dres.grad.data()[k], (up - down) / (2.0 * step)));
    }
  }
  return rep;
}

}  // namespace prp
