#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "wss/rng.hpp"

namespace wss {

using cdouble = std::complex<double>;

/// Wideband spectrum layout: [0, B) split into L equal sub-bands, observed
/// over a window of duration T_d at the Nyquist rate 1/T = B.
struct SpectrumConfig {
  double total_bandwidth_hz = 320e6;
  std::size_t num_subbands = 40;
  double window_duration_s = 8e-6;

  double subband_bandwidth_hz() const { return total_bandwidth_hz / static_cast<double>(num_subbands); }
  double nyquist_interval_s() const { return 1.0 / total_bandwidth_hz; }
  std::size_t nyquist_samples() const;

  /// Throws std::invalid_argument on non-positive bandwidth/duration or L == 0.
  void validate() const;
};

/// L-entry binary spectrum occupancy indicator.
struct OccupancyVector {
  std::vector<std::uint8_t> bits;

  OccupancyVector() = default;
  explicit OccupancyVector(std::size_t length) : bits(length, 0) {}
  explicit OccupancyVector(std::vector<std::uint8_t> b) : bits(std::move(b)) {}

  std::size_t size() const { return bits.size(); }
  std::size_t popcount() const;
  bool operator[](std::size_t i) const { return bits[i] != 0; }
  bool operator==(const OccupancyVector&) const = default;
};

/// Per-PU waveform parameters.
struct PuParams {
  double energy = 1.0;
  double time_offset_s = 0.0;
  double carrier_hz = 0.0;
};

/// Complex baseband samples over the sensing window at the Nyquist rate.
struct NyquistSequence {
  std::vector<cdouble> samples;
  double snr_db = std::numeric_limits<double>::infinity();

  bool noiseless() const { return snr_db == std::numeric_limits<double>::infinity(); }
};

inline constexpr double kNoiseless = std::numeric_limits<double>::infinity();

double sinc(double x);

/// Picks K of L positions uniformly without replacement.
OccupancyVector draw_occupancy(std::size_t L, std::size_t K, Rng& rng);

/// Center frequency (l + 1/2)·B₀ of the zero-based sub-band l.
double subband_center_hz(const SpectrumConfig& cfg, std::size_t l);

/// One PuParams per occupied sub-band in ascending sub-band order:
/// unit energy, carrier at the sub-band center, offset uniform in (0, T_d).
std::vector<PuParams> draw_pu_params(const OccupancyVector& occ, const SpectrumConfig& cfg, Rng& rng);

/// Noiseless compound signal sampled at m·T:
///   x[m] = Σ_k √(E_k·B₀)·sinc(B₀(mT − t_k))·exp(+j2π f_k mT).
NyquistSequence synth_signal(const OccupancyVector& occ, const std::vector<PuParams>& pu,
                             const SpectrumConfig& cfg);

/// Adds circular complex Gaussian noise of variance σ² = P_sig / 10^(snr/10),
/// where P_sig is the mean |x[m]|² of the input. snr_db = +inf returns the
/// input unchanged.
NyquistSequence add_awgn(const NyquistSequence& seq, double snr_db, Rng& rng);

/// Adds noise with an explicit total variance σ² (σ²/2 per real component).
void add_complex_noise(std::vector<cdouble>& samples, double variance, Rng& rng);

double mean_power(const std::vector<cdouble>& samples);

}  // namespace wss
