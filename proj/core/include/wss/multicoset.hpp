#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "wss/rng.hpp"
#include "wss/signal_synth.hpp"

namespace wss {

/// Strictly increasing branch offsets 0 ≤ c₁ < … < c_P ≤ L−1.
class CosetPattern {
 public:
  /// Sorts the offsets; throws std::invalid_argument on duplicates, offsets ≥ L,
  /// an empty set, or L == 0.
  CosetPattern(std::vector<std::size_t> offsets, std::size_t L);

  const std::vector<std::size_t>& offsets() const { return offsets_; }
  std::size_t num_cosets() const { return offsets_.size(); }
  std::size_t num_subbands() const { return L_; }

 private:
  std::vector<std::size_t> offsets_;
  std::size_t L_;
};

/// P distinct offsets drawn uniformly from {0..L−1}.
CosetPattern draw_coset_pattern(std::size_t L, std::size_t P, Rng& rng);

/// P×N branch samples, row p holds x[n·L + c_p].
using CosetSequences = Eigen::MatrixXcd;

/// A[p,l] = exp(+j2π·l·c_p/L)/(L·T) for zero-based l, with its
/// Moore–Penrose pseudo-inverse computed once.
class MeasurementMatrix {
 public:
  MeasurementMatrix(CosetPattern pattern, double nyquist_interval_s);

  const Eigen::MatrixXcd& matrix() const { return A_; }
  const Eigen::MatrixXcd& pinv() const { return pinv_; }
  const CosetPattern& pattern() const { return pattern_; }
  double nyquist_interval_s() const { return T_; }
  std::size_t rank() const { return rank_; }

 private:
  CosetPattern pattern_;
  double T_;
  Eigen::MatrixXcd A_;
  Eigen::MatrixXcd pinv_;
  std::size_t rank_ = 0;
};

MeasurementMatrix build_measurement_matrix(const CosetPattern& pattern, double nyquist_interval_s);

/// SVD pseudo-inverse; singular values below rel_tol·σ_max are treated as zero.
Eigen::MatrixXcd pseudo_inverse(const Eigen::MatrixXcd& m, double rel_tol = 1e-10,
                                std::size_t* rank_out = nullptr);

CosetSequences coset_sample(const NyquistSequence& x, const CosetPattern& pattern, std::size_t N);

/// Phase-corrected branch spectra on the grid f_n = n/(N·L·T):
///   out[p,n] = exp(−j2π f_n c_p T)·DFT_N(y_p)[n].
Eigen::MatrixXcd branch_spectra(const CosetSequences& y, const CosetPattern& pattern);

/// Unnormalized coarse estimate X̂ = A†·branch_spectra(y), an L×N matrix.
Eigen::MatrixXcd coarse_estimate(const CosetSequences& y, const MeasurementMatrix& A);

/// Real L×N×2 network input. Element (l, n, c) lives at ((l·N)+n)·2+c,
/// c = 0 real part, c = 1 imaginary part.
class FeatureTensor {
 public:
  FeatureTensor() = default;
  FeatureTensor(std::size_t L, std::size_t N) : L_(L), N_(N), data_(L * N * 2, 0.0) {}
  FeatureTensor(std::size_t L, std::size_t N, std::vector<double> data);

  std::size_t rows() const { return L_; }
  std::size_t cols() const { return N_; }
  double& at(std::size_t l, std::size_t n, std::size_t c) { return data_[(l * N_ + n) * 2 + c]; }
  double at(std::size_t l, std::size_t n, std::size_t c) const { return data_[(l * N_ + n) * 2 + c]; }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

 private:
  std::size_t L_ = 0;
  std::size_t N_ = 0;
  std::vector<double> data_;
};

inline constexpr double kNormalizationFloor = 1e-12;

/// Element-wise unit-modulus normalization of X̂; entries below the floor map to 0.
FeatureTensor normalize_estimate(const Eigen::MatrixXcd& xhat);

FeatureTensor preprocess(const CosetSequences& y, const MeasurementMatrix& A);

}  // namespace wss
