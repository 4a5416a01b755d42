#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wss/checkpoint.hpp"
#include "wss/config.hpp"
#include "wss/dataset.hpp"
#include "wss/evalkit.hpp"
#include "wss/pipeline.hpp"
#include "wss/pruning.hpp"
#include "wss/trainer.hpp"
#include "wss/transfer.hpp"

namespace {

// Config selection shared by every subcommand.
struct ConfigFlags {
  std::string preset = "paper";
  std::string file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<double> snr;
  std::optional<std::size_t> k;
  std::optional<std::string> output;
  std::optional<unsigned> workers;
  std::optional<double> lr;
  std::optional<std::size_t> epochs;

  void attach(CLI::App* app) {
    app->add_option("--preset", preset, "Built-in configuration: paper or desk")->check(CLI::IsMember({"paper", "desk"}));
    app->add_option("--config", file, "JSON configuration file (replaces the preset)")->check(CLI::ExistingFile);
    app->add_option("--set", overrides, "Override a config field, e.g. --set train.batch_size=32");
    app->add_option("--seed", seed, "Master seed");
    app->add_option("--snr", snr, "SNR in dB");
    app->add_option("--k", k, "Number of occupied sub-bands");
    app->add_option("--output", output, "Output directory");
    app->add_option("--workers", workers, "Worker threads for sample generation");
    app->add_option("--lr", lr, "Training learning rate");
    app->add_option("--epochs", epochs, "Maximum training epochs");
  }

  wss::ExperimentConfig resolve() const {
    wss::ExperimentConfig cfg = file.empty() ? wss::preset(preset) : wss::load_config(file);
    if (seed) cfg.seed = *seed;
    if (snr) cfg.snr_db = *snr;
    if (k) cfg.occupied = *k;
    if (output) cfg.runtime.output_dir = *output;
    if (workers) cfg.runtime.workers = *workers;
    if (lr) cfg.train.learning_rate = *lr;
    if (epochs) {
      cfg.train.max_epochs = *epochs;
      if (cfg.train.patience > *epochs) cfg.train.patience = *epochs;
    }
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + o + "'");
      cfg = wss::with_override(cfg, o.substr(0, eq), o.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
  }
};

wss::StreamId parse_split(const std::string& s) {
  if (s == "train") return wss::StreamId::kTrain;
  if (s == "val") return wss::StreamId::kValidation;
  if (s == "test") return wss::StreamId::kTest;
  if (s == "adapt") return wss::StreamId::kAdaptation;
  throw std::invalid_argument("unknown split '" + s + "'");
}

std::size_t split_size(const wss::ExperimentConfig& cfg, wss::StreamId split) {
  switch (split) {
    case wss::StreamId::kTrain: return cfg.sizes.train;
    case wss::StreamId::kValidation: return cfg.sizes.validation;
    case wss::StreamId::kAdaptation: return cfg.transfer.adaptation_sizes.empty() ? 100 : cfg.transfer.adaptation_sizes.back();
    default: return cfg.sizes.test;
  }
}

void print_metrics(const wss::Metrics& m, const std::string& extra = "") {
  std::printf("{\"p_d\": %.6f, \"p_f\": %.6f, \"p_acc\": %.6f, \"tp\": %llu, \"fp\": %llu, \"tn\": %llu, \"fn\": %llu%s}\n",
              m.p_d, m.p_f, m.p_acc, static_cast<unsigned long long>(m.tp), static_cast<unsigned long long>(m.fp),
              static_cast<unsigned long long>(m.tn), static_cast<unsigned long long>(m.fn), extra.c_str());
}

void log_epoch(const wss::EpochRecord& e) {
  if (std::isnan(e.val_loss)) {
    std::fprintf(stderr, "epoch %zu train %.4f\n", e.epoch, e.train_loss);
  } else {
    std::fprintf(stderr, "epoch %zu train %.4f val %.4f\n", e.epoch, e.train_loss, e.val_loss);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sub-Nyquist wideband spectrum sensing with CA-WSSNet"};
  app.require_subcommand(1);

  // config
  ConfigFlags config_flags;
  std::string config_out;
  auto* config_cmd = app.add_subcommand("config", "Print the resolved configuration as JSON");
  config_flags.attach(config_cmd);
  config_cmd->add_option("-o,--out", config_out, "Write to a file instead of stdout");

  // gen
  ConfigFlags gen_flags;
  std::string gen_split = "train", gen_out;
  std::optional<std::size_t> gen_count;
  std::vector<std::size_t> gen_strata;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a dataset file");
  gen_flags.attach(gen_cmd);
  gen_cmd->add_option("--split", gen_split, "train, val, test or adapt");
  gen_cmd->add_option("--count", gen_count, "Number of samples (default: the config's split size)");
  gen_cmd->add_option("--k-list", gen_strata, "Cycle K over these values instead of --k")->delimiter(',');
  gen_cmd->add_option("-o,--out", gen_out, "Output dataset file")->required();

  // train
  ConfigFlags train_flags;
  std::string train_data, val_data, train_out, variant_name = "ca-wssnet";
  auto* train_cmd = app.add_subcommand("train", "Train a network with early stopping");
  train_flags.attach(train_cmd);
  train_cmd->add_option("--train", train_data, "Training dataset")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--val", val_data, "Validation dataset")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--variant", variant_name, "ca-wssnet or mlp-wssnet");
  train_cmd->add_option("-o,--out", train_out, "Output checkpoint")->required();

  // prune
  ConfigFlags prune_flags;
  std::string prune_model, prune_train, prune_val, prune_out;
  auto* prune_cmd = app.add_subcommand("prune", "Magnitude-prune layers 1-3, then fine-tune when data is given");
  prune_flags.attach(prune_cmd);
  prune_cmd->add_option("--model", prune_model, "Input checkpoint")->required()->check(CLI::ExistingFile);
  prune_cmd->add_option("--train", prune_train, "Fine-tuning training dataset")->check(CLI::ExistingFile);
  prune_cmd->add_option("--val", prune_val, "Fine-tuning validation dataset")->check(CLI::ExistingFile);
  prune_cmd->add_option("-o,--out", prune_out, "Output checkpoint")->required();

  // adapt
  ConfigFlags adapt_flags;
  std::string adapt_model, adapt_data, adapt_out;
  std::optional<std::size_t> adapt_count;
  auto* adapt_cmd = app.add_subcommand("adapt", "Adapt layers 3-4 on a target-domain set");
  adapt_flags.attach(adapt_cmd);
  adapt_cmd->add_option("--model", adapt_model, "Source checkpoint")->required()->check(CLI::ExistingFile);
  adapt_cmd->add_option("--data", adapt_data, "Adaptation dataset")->required()->check(CLI::ExistingFile);
  adapt_cmd->add_option("--count", adapt_count, "Use only the first N samples");
  adapt_cmd->add_option("-o,--out", adapt_out, "Output checkpoint")->required();

  // eval
  ConfigFlags eval_flags;
  std::string eval_model, eval_data, eval_split = "test";
  std::optional<double> eval_threshold;
  bool eval_somp = false;
  std::optional<std::size_t> eval_count;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset, or SOMP on regenerated samples");
  eval_flags.attach(eval_cmd);
  eval_cmd->add_option("--model", eval_model, "Checkpoint")->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", eval_data, "Dataset")->check(CLI::ExistingFile);
  eval_cmd->add_option("--threshold", eval_threshold, "Decision threshold in (0, 1)");
  eval_cmd->add_flag("--somp", eval_somp, "Evaluate SOMP with the true K instead of a network");
  eval_cmd->add_option("--split", eval_split, "Split regenerated for --somp");
  eval_cmd->add_option("--count", eval_count, "Samples regenerated for --somp");

  // roc
  std::string roc_model, roc_data, roc_out;
  std::size_t roc_points = 101;
  auto* roc_cmd = app.add_subcommand("roc", "Sweep the decision threshold");
  roc_cmd->add_option("--model", roc_model, "Checkpoint")->required()->check(CLI::ExistingFile);
  roc_cmd->add_option("--data", roc_data, "Dataset")->required()->check(CLI::ExistingFile);
  roc_cmd->add_option("--points", roc_points, "Grid size")->check(CLI::Range(2, 100000));
  roc_cmd->add_option("-o,--out", roc_out, "CSV file (default stdout)");

  // cost
  ConfigFlags cost_flags;
  std::string cost_model, cost_variant = "ca-wssnet";
  bool cost_pruned = false;
  auto* cost_cmd = app.add_subcommand("cost", "Parameter and FLOP counts");
  cost_flags.attach(cost_cmd);
  cost_cmd->add_option("--model", cost_model, "Checkpoint (default: a fresh model from the config)")
      ->check(CLI::ExistingFile);
  cost_cmd->add_option("--variant", cost_variant, "ca-wssnet or mlp-wssnet for a fresh model");
  cost_cmd->add_flag("--pruned", cost_pruned, "Prune the model with the config's ratio before counting");

  // pipeline
  ConfigFlags pipe_flags;
  bool pipe_fresh = false;
  auto* pipe_cmd = app.add_subcommand("pipeline", "Run train, prune, fine-tune, evaluate and the enabled experiments");
  pipe_flags.attach(pipe_cmd);
  pipe_cmd->add_flag("--fresh", pipe_fresh, "Ignore cached datasets and checkpoints in the output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*config_cmd) {
      const auto cfg = config_flags.resolve();
      if (config_out.empty()) {
        std::cout << wss::to_json(cfg) << "\n";
      } else {
        wss::save_config(cfg, config_out);
      }
    } else if (*gen_cmd) {
      const auto cfg = gen_flags.resolve();
      const auto split = parse_split(gen_split);
      const std::vector<std::size_t> strata = gen_strata.empty() ? std::vector<std::size_t>{cfg.occupied} : gen_strata;
      const auto ds = wss::generate_dataset(cfg, split, cfg.snr_db, strata, gen_count.value_or(split_size(cfg, split)));
      wss::save_dataset(ds, gen_out);
      std::fprintf(stderr, "wrote %zu samples to %s\n", ds.size(), gen_out.c_str());
    } else if (*train_cmd) {
      const auto cfg = train_flags.resolve();
      const auto tr = wss::load_dataset(train_data);
      const auto va = wss::load_dataset(val_data);
      wss::Rng init = wss::child_stream(cfg.seed, wss::StreamId::kInit, 0);
      auto spec = cfg.train;
      spec.seed = wss::derive_seed(cfg.seed, static_cast<std::uint64_t>(wss::StreamId::kShuffle), 0);
      const auto model = wss::init_model(wss::architecture(cfg, wss::variant_from_string(variant_name)), init);
      const auto r = wss::train(model, tr, va, spec, wss::LayerSet::all(), log_epoch);
      wss::save_checkpoint(r.model, train_out);
      std::fprintf(stderr, "best epoch %zu of %zu\n", r.best_epoch, r.history.size());
    } else if (*prune_cmd) {
      const auto cfg = prune_flags.resolve();
      std::vector<wss::LayerPruneReport> report;
      auto model = wss::prune(wss::load_checkpoint(prune_model), cfg.prune, &report);
      for (const auto& r : report) {
        std::fprintf(stderr, "layer %d: threshold %.6g keeps %zu of %zu\n", r.layer, r.threshold, r.survivors, r.total);
      }
      if (prune_train.empty() != prune_val.empty()) throw std::invalid_argument("--train and --val go together");
      if (!prune_train.empty()) {
        const auto seed = wss::derive_seed(cfg.seed, static_cast<std::uint64_t>(wss::StreamId::kShuffle), 1);
        model = wss::finetune(model, wss::load_dataset(prune_train), wss::load_dataset(prune_val), cfg.prune, seed,
                              log_epoch)
                    .model;
      }
      wss::save_checkpoint(model, prune_out);
    } else if (*adapt_cmd) {
      const auto cfg = adapt_flags.resolve();
      auto data = wss::load_dataset(adapt_data);
      if (adapt_count) {
        if (*adapt_count > data.size()) throw std::invalid_argument("--count exceeds the dataset size");
        data = data.head(*adapt_count);
      }
      const auto seed = wss::derive_seed(cfg.seed, static_cast<std::uint64_t>(wss::StreamId::kShuffle), 2);
      const auto model = wss::adapt(wss::load_checkpoint(adapt_model), data, cfg.transfer.spec, seed, log_epoch);
      wss::save_checkpoint(model, adapt_out);
    } else if (*eval_cmd) {
      const auto cfg = eval_flags.resolve();
      const double threshold = eval_threshold.value_or(cfg.evaluation.threshold);
      if (eval_somp) {
        const auto split = parse_split(eval_split);
        const std::vector<std::size_t> strata{cfg.occupied};
        const auto ev = wss::evaluate_somp(cfg, split, cfg.snr_db, strata, eval_count.value_or(split_size(cfg, split)));
        print_metrics(ev.metrics, ", \"degraded\": " + std::to_string(ev.degraded));
      } else {
        if (eval_model.empty() || eval_data.empty()) throw std::invalid_argument("eval needs --model and --data (or --somp)");
        const auto ev = wss::evaluate_network(wss::load_checkpoint(eval_model), wss::load_dataset(eval_data), threshold);
        print_metrics(ev.metrics);
      }
    } else if (*roc_cmd) {
      const auto model = wss::load_checkpoint(roc_model);
      const auto data = wss::load_dataset(roc_data);
      std::vector<wss::RocRow> rows;
      for (const auto& p : wss::roc_sweep(model, data, wss::threshold_grid(roc_points))) {
        rows.push_back({std::string(wss::to_string(model.arch.variant)), data.meta.snr_db,
                        static_cast<std::size_t>(data.meta.occupied), p});
      }
      const std::string csv = wss::format_roc_csv(rows);
      if (roc_out.empty()) {
        std::cout << csv;
      } else {
        std::ofstream out(roc_out);
        if (!(out << csv)) throw std::runtime_error("cannot write " + roc_out);
      }
    } else if (*cost_cmd) {
      const auto cfg = cost_flags.resolve();
      wss::Model model;
      if (!cost_model.empty()) {
        model = wss::load_checkpoint(cost_model);
      } else {
        wss::Rng init = wss::child_stream(cfg.seed, wss::StreamId::kInit, 0);
        model = wss::init_model(wss::architecture(cfg, wss::variant_from_string(cost_variant)), init);
      }
      if (cost_pruned) model = wss::prune(model, cfg.prune);
      const auto c = wss::count_cost(model);
      std::printf("{\"param_total\": %zu, \"param_nonzero\": %zu, \"flops\": %zu, \"adaptable\": %zu, \"convention\": \"%s\"}\n",
                  c.param_total, c.param_nonzero, c.flops, wss::adaptable_parameter_count(model), c.convention.c_str());
    } else if (*pipe_cmd) {
      const auto cfg = pipe_flags.resolve();
      wss::PipelineOptions opts;
      opts.resume = !pipe_fresh;
      opts.log = [](std::string_view msg) { std::cerr << msg << std::endl; };
      const auto result = wss::run_pipeline(cfg, opts);
      std::cout << wss::format_results_csv(result.rows);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "wss: error: %s\n", e.what());
    return 1;
  }
  return 0;
}
