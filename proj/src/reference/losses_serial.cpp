#include "prp/reference/serial.hpp"

#include <algorithm>

namespace prp::serial {

DescriptorLossResult descriptor_loss(const DescriptorGrid& a, const DescriptorGrid& b, const CellCorrespondence& s,
                                     const DescriptorLossParams& params) {
  const int n = a.cells(), m = b.cells(), dim = a.dim();
  DescriptorLossResult out;
  out.grad_a = Eigen::MatrixXd::Zero(n, dim);
  out.grad_b = Eigen::MatrixXd::Zero(m, dim);
  const double norm = 1.0 / (static_cast<double>(n) * static_cast<double>(m));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      double x = 0.0;
      for (int d = 0; d < dim; ++d) x += a.data(i, d) * b.data(j, d);
      const bool pos = s.contains({i / a.wc, i % a.wc, j / b.wc, j % b.wc});
      double coeff = 0.0;
      if (pos) {
        out.loss += params.lambda_d * std::max(0.0, params.m_p - x);
        if (params.m_p - x > 0.0) coeff = -params.lambda_d;
      } else {
        out.loss += std::max(0.0, x - params.m_n);
        if (x - params.m_n > 0.0) coeff = 1.0;
      }
      for (int d = 0; d < dim; ++d) {
        out.grad_a(i, d) += norm * coeff * b.data(j, d);
        out.grad_b(j, d) += norm * coeff * a.data(i, d);
      }
    }
  out.loss *= norm;
  return out;
}

}  // namespace prp::serial
