#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wss/dataset.hpp"
#include "wss/model.hpp"
#include "wss/signal_synth.hpp"

namespace wss {

inline constexpr double kDefaultThreshold = 0.5;

/// ô_l = 1 iff õ_l > λ. Throws std::invalid_argument unless λ ∈ (0, 1).
OccupancyVector decide(std::span<const double> probabilities, double threshold);

/// Element-wise confusion counts over all sub-bands of all samples.
struct Metrics {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;
  double p_d = 0.0;
  double p_f = 0.0;
  double p_acc = 0.0;
  /// False when the denominator was zero and the ratio fell back to 0.
  bool p_d_defined = true;
  bool p_f_defined = true;
  bool p_acc_defined = true;

  void add(const OccupancyVector& prediction, const OccupancyVector& truth);
  void finalize();
};

Metrics metrics(std::span<const OccupancyVector> predictions, std::span<const OccupancyVector> truths);

/// Thresholds a probability matrix (one row per sample) against a dataset's labels.
Metrics metrics(const Eigen::MatrixXd& probabilities, const Dataset& truth, double threshold);

struct RocPoint {
  double threshold = 0.0;
  double p_d = 0.0;
  double p_f = 0.0;
};

/// One metrics evaluation per grid value over fixed scores. The grid must
/// be sorted ascending inside (0, 1).
std::vector<RocPoint> roc_sweep(const Eigen::MatrixXd& probabilities, const Dataset& truth,
                                std::span<const double> thresholds);
std::vector<RocPoint> roc_sweep(const Model& model, const Dataset& test_set, std::span<const double> thresholds);

/// Evenly spaced thresholds strictly inside (0, 1), endpoints included at eps.
std::vector<double> threshold_grid(std::size_t points, double eps = 1e-6);

/// P_d of the piecewise-linear ROC (anchored at (0,0) and (1,1)) at P_f = pf.
double interpolate_pd(std::span<const RocPoint> curve, double pf);

struct CostReport {
  std::size_t param_total = 0;
  std::size_t param_nonzero = 0;
  std::size_t flops = 0;
  std::string convention;
};

/// Parameter counts by enumeration and inference FLOPs:
///   2·(L·N·M₁ + L·N·M₂ + M₃ + M₄) + 4·N₁²·L·N²
/// with M_i the live (unmasked) scalars of layer i and one multiply-
/// accumulate counted as 2 FLOPs. The attention term is absent for
/// MLP-WSSNet.
CostReport count_cost(const Model& model);

}  // namespace wss
