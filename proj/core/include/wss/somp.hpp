#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "wss/multicoset.hpp"
#include "wss/signal_synth.hpp"

namespace wss {

struct SompResult {
  OccupancyVector occupancy;
  /// Selected sub-bands in selection order.
  std::vector<std::size_t> support;
  /// Frobenius norm of the residual before the first and after every iteration.
  std::vector<double> residual_norms;
  /// Set when the loop stopped early because A_S lost column rank.
  bool degraded = false;
};

/// Simultaneous orthogonal matching pursuit on Y = A·X with N snapshots.
/// Each iteration picks the unselected column maximizing
/// Σ_n |a_lᴴ r_n| / ‖a_l‖ and re-projects Y onto the selected columns.
SompResult somp_detect(const Eigen::MatrixXcd& measurements, const MeasurementMatrix& A, std::size_t sparsity);

}  // namespace wss
