#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "wss/dataset.hpp"
#include "wss/evalkit.hpp"
#include "wss/model.hpp"
#include "wss/multicoset.hpp"
#include "wss/pruning.hpp"
#include "wss/signal_synth.hpp"
#include "wss/trainer.hpp"
#include "wss/transfer.hpp"

namespace wss {

struct SamplingConfig {
  std::size_t branches = 16;  // P
  std::size_t samples_per_coset = 64;  // N
  /// Explicit coset offsets; empty means a pattern drawn from the master seed.
  std::vector<std::size_t> coset_offsets;
};

struct DatasetSizes {
  std::size_t train = 12000;
  std::size_t validation = 4000;
  std::size_t test = 4000;
};

struct NetworkConfig {
  std::size_t attention_channels = 4;
  std::size_t fc_width = 128;
};

struct TransferConfig {
  TransferSpec spec;
  std::size_t target_occupied = 8;
  std::vector<std::size_t> adaptation_sizes{25, 50, 100, 200, 400};
};

struct EvaluationConfig {
  double threshold = kDefaultThreshold;
  std::size_t roc_points = 101;
};

/// Optional stages of run_pipeline beyond train → prune → finetune → evaluate.
struct ExperimentSwitches {
  bool ablation = true;
  /// SNR grid for the accuracy and ROC sweeps; empty disables the sweep.
  std::vector<double> snr_sweep;
  bool occupancy_sweep = true;
  double occupancy_snr_db = 6.0;
  /// K values of the occupancy sweep, also the strata of all-case training.
  std::vector<std::size_t> occupancy_list{4, 8, 12, 16, 20};
  bool transfer = true;
};

struct RuntimeConfig {
  std::string output_dir = "runs/paper";
  unsigned workers = 1;
  /// Wall-clock columns make results.csv machine dependent; off by default.
  bool emit_wall_clock = false;
};

struct ExperimentConfig {
  std::string preset = "paper";
  std::uint64_t seed = 1;
  SpectrumConfig spectrum;
  SamplingConfig sampling;
  std::size_t occupied = 12;  // K
  double snr_db = 8.0;
  DatasetSizes sizes;
  NetworkConfig network;
  TrainSpec train;
  PruneSpec prune;
  TransferConfig transfer;
  EvaluationConfig evaluation;
  ExperimentSwitches experiments;
  RuntimeConfig runtime;

  /// Throws std::invalid_argument on any inconsistent field.
  void validate() const;
};

/// Full-scale settings.
ExperimentConfig paper_preset();
/// Reduced settings for quick runs (N_tr = 3000, at most 150 epochs).
ExperimentConfig desk_preset();
/// "paper" or "desk"; throws std::invalid_argument otherwise.
ExperimentConfig preset(std::string_view name);

/// Canonical JSON with every field spelled out.
std::string to_json(const ExperimentConfig& cfg);
/// Strict parse: unknown and missing keys are errors.
ExperimentConfig config_from_json(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path);

/// Replaces one field addressed by a dotted path ("train.learning_rate")
/// with a JSON-encoded value ("1e-4", "[4,8]", "\"runs/x\"", or a bare
/// string).
ExperimentConfig with_override(const ExperimentConfig& cfg, std::string_view dotted_path, std::string_view value);

/// FNV-1a 64 of a byte string.
std::uint64_t stable_hash(std::string_view s);
/// Hash of the canonical JSON without the runtime section, which does not
/// affect any computed value.
std::uint64_t config_hash(const ExperimentConfig& cfg);
/// Hash of the fields that determine generated samples only.
std::uint64_t data_hash(const ExperimentConfig& cfg);
std::string hex_hash(std::uint64_t h);

Architecture architecture(const ExperimentConfig& cfg, Variant variant);
CosetPattern coset_pattern(const ExperimentConfig& cfg);
MeasurementMatrix measurement_matrix(const ExperimentConfig& cfg);
SampleGenerator sample_generator(const ExperimentConfig& cfg);

}  // namespace wss
