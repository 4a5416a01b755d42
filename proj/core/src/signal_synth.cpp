#include "wss/signal_synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace wss {

std::size_t SpectrumConfig::nyquist_samples() const {
  return static_cast<std::size_t>(std::llround(window_duration_s * total_bandwidth_hz));
}

void SpectrumConfig::validate() const {
  if (!(total_bandwidth_hz > 0.0)) throw std::invalid_argument("total bandwidth must be positive");
  if (num_subbands == 0) throw std::invalid_argument("number of sub-bands must be positive");
  if (!(window_duration_s > 0.0)) throw std::invalid_argument("window duration must be positive");
  if (nyquist_samples() == 0) throw std::invalid_argument("window holds no Nyquist samples");
}

std::size_t OccupancyVector::popcount() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](auto b) { return b != 0; }));
}

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

OccupancyVector draw_occupancy(std::size_t L, std::size_t K, Rng& rng) {
  if (K > L) {
    throw std::invalid_argument("draw_occupancy: K=" + std::to_string(K) + " exceeds L=" + std::to_string(L));
  }
  std::vector<std::size_t> idx(L);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  OccupancyVector occ(L);
  for (std::size_t k = 0; k < K; ++k) occ.bits[idx[k]] = 1;
  return occ;
}

double subband_center_hz(const SpectrumConfig& cfg, std::size_t l) {
  return (static_cast<double>(l) + 0.5) * cfg.subband_bandwidth_hz();
}

std::vector<PuParams> draw_pu_params(const OccupancyVector& occ, const SpectrumConfig& cfg, Rng& rng) {
  std::uniform_real_distribution<double> offset(0.0, cfg.window_duration_s);
  std::vector<PuParams> pus;
  pus.reserve(occ.popcount());
  for (std::size_t l = 0; l < occ.size(); ++l) {
    if (!occ[l]) continue;
    PuParams p;
    p.energy = 1.0;
    do {
      p.time_offset_s = offset(rng);
    } while (p.time_offset_s <= 0.0);
    p.carrier_hz = subband_center_hz(cfg, l);
    pus.push_back(p);
  }
  return pus;
}

NyquistSequence synth_signal(const OccupancyVector& occ, const std::vector<PuParams>& pu,
                             const SpectrumConfig& cfg) {
  cfg.validate();
  if (occ.size() != cfg.num_subbands) {
    throw std::invalid_argument("synth_signal: occupancy length does not match L");
  }
  if (pu.size() != occ.popcount()) {
    throw std::invalid_argument("synth_signal: " + std::to_string(pu.size()) + " PU parameter sets for " +
                                std::to_string(occ.popcount()) + " occupied sub-bands");
  }
  const std::size_t M = cfg.nyquist_samples();
  const double T = cfg.nyquist_interval_s();
  const double B0 = cfg.subband_bandwidth_hz();
  NyquistSequence out;
  out.samples.assign(M, cdouble{0.0, 0.0});
  for (const auto& p : pu) {
    const double amp = std::sqrt(p.energy * B0);
    const double w = 2.0 * std::numbers::pi * p.carrier_hz * T;
    for (std::size_t m = 0; m < M; ++m) {
      const double t = static_cast<double>(m) * T;
      const double env = amp * sinc(B0 * (t - p.time_offset_s));
      out.samples[m] += std::polar(env, w * static_cast<double>(m));
    }
  }
  return out;
}

double mean_power(const std::vector<cdouble>& samples) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& s : samples) acc += std::norm(s);
  return acc / static_cast<double>(samples.size());
}

void add_complex_noise(std::vector<cdouble>& samples, double variance, Rng& rng) {
  if (variance < 0.0) throw std::invalid_argument("noise variance must be non-negative");
  std::normal_distribution<double> gauss(0.0, std::sqrt(variance / 2.0));
  for (auto& s : samples) {
    const double re = gauss(rng);
    const double im = gauss(rng);
    s += cdouble{re, im};
  }
}

NyquistSequence add_awgn(const NyquistSequence& seq, double snr_db, Rng& rng) {
  if (std::isinf(snr_db) && snr_db > 0) return seq;
  if (std::isnan(snr_db)) throw std::invalid_argument("add_awgn: SNR is NaN");
  const double p_sig = mean_power(seq.samples);
  if (!(p_sig > 0.0)) throw std::invalid_argument("add_awgn: SNR requested on an all-zero signal");
  NyquistSequence out = seq;
  add_complex_noise(out.samples, p_sig / std::pow(10.0, snr_db / 10.0), rng);
  out.snr_db = snr_db;
  return out;
}

}  // namespace wss
