#include "wss/multicoset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include <unsupported/Eigen/FFT>

namespace wss {

CosetPattern::CosetPattern(std::vector<std::size_t> offsets, std::size_t L)
    : offsets_(std::move(offsets)), L_(L) {
  if (L_ == 0) throw std::invalid_argument("coset pattern: L must be positive");
  if (offsets_.empty()) throw std::invalid_argument("coset pattern: at least one offset required");
  std::sort(offsets_.begin(), offsets_.end());
  if (std::adjacent_find(offsets_.begin(), offsets_.end()) != offsets_.end()) {
    throw std::invalid_argument("coset pattern: duplicate offsets");
  }
  if (offsets_.back() >= L_) {
    throw std::invalid_argument("coset pattern: offset " + std::to_string(offsets_.back()) +
                                " outside [0, " + std::to_string(L_ - 1) + "]");
  }
}

CosetPattern draw_coset_pattern(std::size_t L, std::size_t P, Rng& rng) {
  if (P == 0 || P > L) throw std::invalid_argument("draw_coset_pattern: need 0 < P <= L");
  std::vector<std::size_t> idx(L);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(P);
  return CosetPattern(std::move(idx), L);
}

Eigen::MatrixXcd pseudo_inverse(const Eigen::MatrixXcd& m, double rel_tol, std::size_t* rank_out) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double cutoff = s.size() > 0 ? rel_tol * s(0) : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) {
      inv(i) = 1.0 / s(i);
      ++rank;
    }
  }
  if (rank_out) *rank_out = rank;
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

MeasurementMatrix::MeasurementMatrix(CosetPattern pattern, double nyquist_interval_s)
    : pattern_(std::move(pattern)), T_(nyquist_interval_s) {
  if (!(T_ > 0.0)) throw std::invalid_argument("measurement matrix: Nyquist interval must be positive");
  const auto P = static_cast<Eigen::Index>(pattern_.num_cosets());
  const auto L = static_cast<Eigen::Index>(pattern_.num_subbands());
  const double scale = 1.0 / (static_cast<double>(L) * T_);
  A_.resize(P, L);
  for (Eigen::Index p = 0; p < P; ++p) {
    const auto c = pattern_.offsets()[static_cast<std::size_t>(p)];
    for (Eigen::Index l = 0; l < L; ++l) {
      // Reduce l·c mod L first so the phase argument stays exact.
      const auto k = (static_cast<std::size_t>(l) * c) % static_cast<std::size_t>(L);
      const double phase = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(L);
      A_(p, l) = k == 0 ? cdouble{scale, 0.0} : std::polar(scale, phase);
    }
  }
  pinv_ = pseudo_inverse(A_, 1e-10, &rank_);
}

MeasurementMatrix build_measurement_matrix(const CosetPattern& pattern, double nyquist_interval_s) {
  return MeasurementMatrix(pattern, nyquist_interval_s);
}

CosetSequences coset_sample(const NyquistSequence& x, const CosetPattern& pattern, std::size_t N) {
  const std::size_t L = pattern.num_subbands();
  if (N * L > x.samples.size()) {
    throw std::invalid_argument("coset_sample: N·L = " + std::to_string(N * L) + " exceeds signal length " +
                                std::to_string(x.samples.size()));
  }
  const auto P = static_cast<Eigen::Index>(pattern.num_cosets());
  CosetSequences y(P, static_cast<Eigen::Index>(N));
  for (Eigen::Index p = 0; p < P; ++p) {
    const std::size_t c = pattern.offsets()[static_cast<std::size_t>(p)];
    for (std::size_t n = 0; n < N; ++n) y(p, static_cast<Eigen::Index>(n)) = x.samples[n * L + c];
  }
  return y;
}

Eigen::MatrixXcd branch_spectra(const CosetSequences& y, const CosetPattern& pattern) {
  if (static_cast<std::size_t>(y.rows()) != pattern.num_cosets()) {
    throw std::invalid_argument("branch_spectra: row count does not match coset count");
  }
  const Eigen::Index P = y.rows();
  const Eigen::Index N = y.cols();
  const auto L = static_cast<double>(pattern.num_subbands());
  Eigen::MatrixXcd out(P, N);
  if (N == 0) return out;
  Eigen::FFT<double> fft;
  std::vector<cdouble> in(static_cast<std::size_t>(N));
  std::vector<cdouble> spec;
  for (Eigen::Index p = 0; p < P; ++p) {
    for (Eigen::Index n = 0; n < N; ++n) in[static_cast<std::size_t>(n)] = y(p, n);
    fft.fwd(spec, in);
    const auto c = static_cast<double>(pattern.offsets()[static_cast<std::size_t>(p)]);
    for (Eigen::Index n = 0; n < N; ++n) {
      const double phase = -2.0 * std::numbers::pi * static_cast<double>(n) * c / (static_cast<double>(N) * L);
      out(p, n) = std::polar(1.0, phase) * spec[static_cast<std::size_t>(n)];
    }
  }
  return out;
}

Eigen::MatrixXcd coarse_estimate(const CosetSequences& y, const MeasurementMatrix& A) {
  if (y.rows() != A.matrix().rows()) {
    throw std::invalid_argument("coarse_estimate: branch count does not match measurement matrix");
  }
  return A.pinv() * branch_spectra(y, A.pattern());
}

FeatureTensor::FeatureTensor(std::size_t L, std::size_t N, std::vector<double> data)
    : L_(L), N_(N), data_(std::move(data)) {
  if (data_.size() != L_ * N_ * 2) throw std::invalid_argument("feature tensor: data size mismatch");
}

FeatureTensor normalize_estimate(const Eigen::MatrixXcd& xhat) {
  const auto L = static_cast<std::size_t>(xhat.rows());
  const auto N = static_cast<std::size_t>(xhat.cols());
  FeatureTensor out(L, N);
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t n = 0; n < N; ++n) {
      const cdouble v = xhat(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(n));
      const double mag = std::abs(v);
      if (mag < kNormalizationFloor) continue;
      out.at(l, n, 0) = v.real() / mag;
      out.at(l, n, 1) = v.imag() / mag;
    }
  }
  return out;
}

FeatureTensor preprocess(const CosetSequences& y, const MeasurementMatrix& A) {
  return normalize_estimate(coarse_estimate(y, A));
}

}  // namespace wss
