#include "wss/somp.hpp"

#include <stdexcept>

namespace wss {

SompResult somp_detect(const Eigen::MatrixXcd& Y, const MeasurementMatrix& A, std::size_t sparsity) {
  const Eigen::MatrixXcd& a = A.matrix();
  const auto L = static_cast<std::size_t>(a.cols());
  if (Y.rows() != a.rows()) throw std::invalid_argument("somp_detect: measurement rows differ from A");
  if (sparsity > L) throw std::invalid_argument("somp_detect: sparsity exceeds L");

  SompResult res;
  res.occupancy = OccupancyVector(L);
  const Eigen::VectorXd col_norm = a.colwise().norm().transpose();
  Eigen::MatrixXcd residual = Y;
  res.residual_norms.push_back(residual.norm());
  std::vector<bool> chosen(L, false);

  for (std::size_t it = 0; it < sparsity; ++it) {
    const Eigen::MatrixXd corr = (a.adjoint() * residual).cwiseAbs();
    const Eigen::VectorXd score = corr.rowwise().sum().cwiseQuotient(col_norm);
    std::size_t best = L;
    for (std::size_t l = 0; l < L; ++l) {
      if (chosen[l]) continue;
      if (best == L || score(static_cast<Eigen::Index>(l)) > score(static_cast<Eigen::Index>(best))) best = l;
    }

    Eigen::MatrixXcd as(a.rows(), static_cast<Eigen::Index>(res.support.size() + 1));
    for (std::size_t j = 0; j < res.support.size(); ++j)
      as.col(static_cast<Eigen::Index>(j)) = a.col(static_cast<Eigen::Index>(res.support[j]));
    as.col(as.cols() - 1) = a.col(static_cast<Eigen::Index>(best));

    Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(as);
    qr.setThreshold(1e-10);
    if (static_cast<Eigen::Index>(qr.rank()) < as.cols()) {
      res.degraded = true;
      break;
    }
    chosen[best] = true;
    res.support.push_back(best);
    res.occupancy.bits[best] = 1;
    residual = Y - as * qr.solve(Y);
    res.residual_norms.push_back(residual.norm());
  }
  return res;
}

}  // namespace wss
