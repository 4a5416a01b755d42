#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wss/multicoset.hpp"
#include "wss/network.hpp"
#include "wss/signal_synth.hpp"

namespace wss {

/// Provenance recorded in a dataset file header.
struct DatasetMeta {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::uint32_t split = 0;  // StreamId value
  double snr_db = kNoiseless;
  std::uint32_t occupied = 0;  // K, or 0 when mixed
};

/// In-memory labelled feature set. Features keep the on-disk float32
/// precision so that generated and loaded sets train identically.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t L, std::size_t N) : L_(L), N_(N) {}

  std::size_t rows() const { return L_; }
  std::size_t cols() const { return N_; }
  std::size_t size() const { return labels_.size() / (L_ == 0 ? 1 : L_); }
  bool empty() const { return size() == 0; }
  std::size_t feature_size() const { return L_ * N_ * 2; }

  void reserve(std::size_t n);
  void add(const FeatureTensor& x, const OccupancyVector& o);
  void add_raw(std::span<const float> features, std::span<const std::uint8_t> labels);
  void append(const Dataset& other);

  std::span<const float> features(std::size_t i) const { return {features_.data() + i * feature_size(), feature_size()}; }
  std::span<const std::uint8_t> labels(std::size_t i) const { return {labels_.data() + i * L_, L_}; }
  OccupancyVector occupancy(std::size_t i) const;
  ChannelStack input(std::size_t i) const { return to_channel_stack(features(i), L_, N_); }

  /// Rows are the labels of the listed samples.
  Eigen::MatrixXd label_matrix(std::span<const std::size_t> indices) const;
  Eigen::MatrixXd label_matrix() const;

  /// First n samples.
  Dataset head(std::size_t n) const;

  const std::vector<float>& raw_features() const { return features_; }
  const std::vector<std::uint8_t>& raw_labels() const { return labels_; }

  DatasetMeta meta;

 private:
  std::size_t L_ = 0;
  std::size_t N_ = 0;
  std::vector<float> features_;
  std::vector<std::uint8_t> labels_;
};

/// Little-endian binary layout:
///   magic "WSSDATA1", u32 version, u64 config_hash, u64 seed, u32 split,
///   f64 snr_db, u32 occupied, u32 L, u32 N, u32 channels (=2), u64 count,
///   then count·L·N·2 float32 features in (l, n, c) order,
///   then count·L label bytes in {0, 1}.
/// The file is written to a temporary sibling and renamed into place.
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

/// One synthesized observation through the whole front-end.
struct Sample {
  OccupancyVector occupancy;
  CosetSequences branches;
  FeatureTensor features;
};

/// Runs draw_occupancy → synth_signal → add_awgn → coset_sample →
/// preprocess with a child stream per (master seed, split, index).
/// SNR is referenced to the noiseless signal power, so K = 0 samples stay
/// noise-free.
class SampleGenerator {
 public:
  SampleGenerator(SpectrumConfig spectrum, MeasurementMatrix matrix, std::size_t samples_per_coset);

  Sample make(std::uint64_t master_seed, StreamId split, std::size_t index, double snr_db, std::size_t K) const;

  /// Samples [0, count); `occupied` gives K per sample index.
  Dataset make_dataset(std::uint64_t master_seed, StreamId split, std::size_t count, double snr_db,
                       const std::vector<std::size_t>& occupied, unsigned workers = 1) const;
  Dataset make_dataset(std::uint64_t master_seed, StreamId split, std::size_t count, double snr_db, std::size_t K,
                       unsigned workers = 1) const;

  const SpectrumConfig& spectrum() const { return spectrum_; }
  const MeasurementMatrix& matrix() const { return matrix_; }
  std::size_t samples_per_coset() const { return N_; }

 private:
  SpectrumConfig spectrum_;
  MeasurementMatrix matrix_;
  std::size_t N_;
};

}  // namespace wss
