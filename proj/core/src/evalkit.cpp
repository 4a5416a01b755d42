#include "wss/evalkit.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "wss/trainer.hpp"

namespace wss {

OccupancyVector decide(std::span<const double> probabilities, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw std::invalid_argument("decide: threshold " + std::to_string(threshold) + " outside (0, 1)");
  }
  OccupancyVector o(probabilities.size());
  for (std::size_t l = 0; l < probabilities.size(); ++l) o.bits[l] = probabilities[l] > threshold ? 1 : 0;
  return o;
}

void Metrics::add(const OccupancyVector& prediction, const OccupancyVector& truth) {
  if (prediction.size() != truth.size()) throw std::invalid_argument("metrics: prediction and truth lengths differ");
  for (std::size_t l = 0; l < truth.size(); ++l) {
    const bool p = prediction[l];
    const bool t = truth[l];
    if (p && t) ++tp;
    else if (p && !t) ++fp;
    else if (!p && t) ++fn;
    else ++tn;
  }
}

void Metrics::finalize() {
  const auto ratio = [](std::uint64_t num, std::uint64_t den, bool& defined) {
    defined = den != 0;
    return defined ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
  };
  p_d = ratio(tp, tp + fn, p_d_defined);
  p_f = ratio(fp, fp + tn, p_f_defined);
  p_acc = ratio(tp + tn, tp + tn + fp + fn, p_acc_defined);
}

Metrics metrics(std::span<const OccupancyVector> predictions, std::span<const OccupancyVector> truths) {
  if (predictions.size() != truths.size()) throw std::invalid_argument("metrics: sample counts differ");
  Metrics m;
  for (std::size_t i = 0; i < predictions.size(); ++i) m.add(predictions[i], truths[i]);
  m.finalize();
  return m;
}

Metrics metrics(const Eigen::MatrixXd& probabilities, const Dataset& truth, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("metrics: threshold outside (0, 1)");
  if (static_cast<std::size_t>(probabilities.rows()) != truth.size() ||
      static_cast<std::size_t>(probabilities.cols()) != truth.rows()) {
    throw std::invalid_argument("metrics: probability matrix does not match the dataset");
  }
  Metrics m;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto labels = truth.labels(i);
    for (std::size_t l = 0; l < labels.size(); ++l) {
      const bool p = probabilities(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) > threshold;
      const bool t = labels[l] != 0;
      if (p && t) ++m.tp;
      else if (p && !t) ++m.fp;
      else if (!p && t) ++m.fn;
      else ++m.tn;
    }
  }
  m.finalize();
  return m;
}

std::vector<RocPoint> roc_sweep(const Eigen::MatrixXd& probabilities, const Dataset& truth,
                                std::span<const double> thresholds) {
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw std::invalid_argument("roc_sweep: threshold grid must be sorted");
  }
  std::vector<RocPoint> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    const Metrics m = metrics(probabilities, truth, t);
    out.push_back({t, m.p_d, m.p_f});
  }
  return out;
}

std::vector<RocPoint> roc_sweep(const Model& model, const Dataset& test_set, std::span<const double> thresholds) {
  return roc_sweep(predict(model, test_set), test_set, thresholds);
}

std::vector<double> threshold_grid(std::size_t points, double eps) {
  if (points < 2) throw std::invalid_argument("threshold_grid: need at least two points");
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) {
    g[i] = eps + (1.0 - 2.0 * eps) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return g;
}

double interpolate_pd(std::span<const RocPoint> curve, double pf) {
  std::vector<std::pair<double, double>> pts{{0.0, 0.0}, {1.0, 1.0}};
  for (const auto& p : curve) pts.emplace_back(p.p_f, p.p_d);
  std::sort(pts.begin(), pts.end());
  // Upper envelope at duplicate P_f values.
  double best = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const auto [x0, y0] = pts[i];
    const auto [x1, y1] = pts[i + 1];
    if (pf < x0 || pf > x1) continue;
    const double y = x1 > x0 ? y0 + (y1 - y0) * (pf - x0) / (x1 - x0) : std::max(y0, y1);
    best = std::max(best, y);
  }
  return best;
}

CostReport count_cost(const Model& model) {
  const auto& a = model.arch;
  const std::size_t positions = a.L * a.N;
  CostReport r;
  r.param_total = model.parameter_count();
  r.param_nonzero = model.live_parameter_count();
  std::size_t macs = positions * (model.layer_live_count(1) + model.layer_live_count(2)) + model.layer_live_count(3) +
                     model.layer_live_count(4);
  r.flops = 2 * macs;
  if (a.variant == Variant::kCaWssNet) {
    r.flops += 4 * a.attention_channels * a.attention_channels * a.L * a.N * a.N;
  }
  r.convention =
      "flops = 2*(L*N*(M1+M2) + M3 + M4) + 4*C^2*L*N^2; M_i = live scalars of layer i incl. biases; 1 MAC = 2 FLOPs";
  return r;
}

}  // namespace wss
