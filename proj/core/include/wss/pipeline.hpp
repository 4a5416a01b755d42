#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wss/config.hpp"
#include "wss/dataset.hpp"
#include "wss/evalkit.hpp"
#include "wss/model.hpp"
#include "wss/rng.hpp"

namespace wss {

/// One row of results.csv.
struct ResultRow {
  std::string scheme;
  double snr_db = 0.0;
  std::size_t k = 0;
  double threshold = kDefaultThreshold;
  double p_d = 0.0;
  double p_f = 0.0;
  double p_acc = 0.0;
  std::optional<std::size_t> params;
  std::optional<std::size_t> flops;
  /// Mean inference time per sample.
  std::optional<double> wall_clock_ms;
};

/// One point of roc.csv.
struct RocRow {
  std::string scheme;
  double snr_db = 0.0;
  std::size_t k = 0;
  RocPoint point;
};

inline constexpr std::string_view kResultsCsvHeader = "scheme,snr_db,k,lambda,p_d,p_f,p_acc,params,flops,wall_clock_ms";

std::string format_results_csv(std::span<const ResultRow> rows);
std::string format_roc_csv(std::span<const RocRow> rows);
/// Reads results.json as written by run_pipeline.
std::vector<ResultRow> load_results(const std::filesystem::path& path);

/// Per-sample K assignment cycling through the strata: k[i] = strata[i mod |strata|].
std::vector<std::size_t> stratified_occupancy(std::span<const std::size_t> strata, std::size_t count);

/// Generates a split with the config's seed and coset pattern and records
/// the data hash in the metadata.
Dataset generate_dataset(const ExperimentConfig& cfg, StreamId split, double snr_db,
                         std::span<const std::size_t> strata, std::size_t count);

/// SOMP decisions for the same samples generate_dataset would produce,
/// with the true K of each sample as the sparsity.
struct SompEvaluation {
  Metrics metrics;
  std::size_t degraded = 0;
  double seconds = 0.0;
};
SompEvaluation evaluate_somp(const ExperimentConfig& cfg, StreamId split, double snr_db,
                             std::span<const std::size_t> strata, std::size_t count);

/// Test-set evaluation of a network at one threshold.
struct NetworkEvaluation {
  Metrics metrics;
  Eigen::MatrixXd probabilities;
  double seconds = 0.0;
};
NetworkEvaluation evaluate_network(const Model& model, const Dataset& test_set, double threshold);

using LogFn = std::function<void(std::string_view)>;

struct PipelineOptions {
  /// Reuse cached datasets and finished stage checkpoints from the output
  /// directory when their recorded hashes match.
  bool resume = true;
  LogFn log;
};

struct PipelineResult {
  std::vector<ResultRow> rows;
  std::vector<RocRow> roc;
};

/// train → prune → finetune → evaluate, then the enabled experiments
/// (ablation, SNR sweep, occupancy sweep, transfer). Every stage writes a
/// checkpoint under <output>/models and rewrites results.csv, results.json
/// and roc.csv with all rows so far. Stage timings go to timings.csv.
PipelineResult run_pipeline(const ExperimentConfig& cfg, const PipelineOptions& options = {});

}  // namespace wss
