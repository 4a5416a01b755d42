#include "wss/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "detail/binary_io.hpp"
#include "wss/checkpoint.hpp"
#include "wss/pruning.hpp"
#include "wss/somp.hpp"
#include "wss/trainer.hpp"
#include "wss/transfer.hpp"

namespace wss {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt_double(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string split_name(StreamId split) {
  switch (split) {
    case StreamId::kTrain: return "train";
    case StreamId::kValidation: return "val";
    case StreamId::kTest: return "test";
    case StreamId::kAdaptation: return "adapt";
    default: return "split" + std::to_string(static_cast<std::uint64_t>(split));
  }
}

std::string strata_name(std::span<const std::size_t> strata) {
  std::string s;
  for (std::size_t i = 0; i < strata.size(); ++i) s += (i ? "-" : "") + std::to_string(strata[i]);
  return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  detail::write_atomically(path, [&](std::ostream& os) { os.write(text.data(), static_cast<std::streamsize>(text.size())); });
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json row_to_json(const ResultRow& r) {
  json j = {{"scheme", r.scheme}, {"snr_db", r.snr_db}, {"k", r.k},     {"lambda", r.threshold},
            {"p_d", r.p_d},       {"p_f", r.p_f},       {"p_acc", r.p_acc}};
  j["params"] = r.params ? json(*r.params) : json(nullptr);
  j["flops"] = r.flops ? json(*r.flops) : json(nullptr);
  j["wall_clock_ms"] = r.wall_clock_ms ? json(*r.wall_clock_ms) : json(nullptr);
  return j;
}

ResultRow row_from_json(const json& j) {
  ResultRow r;
  r.scheme = j.at("scheme").get<std::string>();
  r.snr_db = j.at("snr_db").get<double>();
  r.k = j.at("k").get<std::size_t>();
  r.threshold = j.at("lambda").get<double>();
  r.p_d = j.at("p_d").get<double>();
  r.p_f = j.at("p_f").get<double>();
  r.p_acc = j.at("p_acc").get<double>();
  if (!j.at("params").is_null()) r.params = j.at("params").get<std::size_t>();
  if (!j.at("flops").is_null()) r.flops = j.at("flops").get<std::size_t>();
  if (!j.at("wall_clock_ms").is_null()) r.wall_clock_ms = j.at("wall_clock_ms").get<double>();
  return r;
}

// Output directory state shared by the pipeline stages.
class Workspace {
 public:
  Workspace(const ExperimentConfig& cfg, const PipelineOptions& options)
      : cfg_(cfg),
        options_(options),
        dir_(cfg.runtime.output_dir),
        stamp_(hex_hash(config_hash(cfg))),
        gen_(sample_generator(cfg)) {
    std::filesystem::create_directories(dir_ / "data");
    std::filesystem::create_directories(dir_ / "models");
    save_config(cfg_, dir_ / "config.json");
  }

  const ExperimentConfig& cfg() const { return cfg_; }

  void log(const std::string& msg) const {
    if (options_.log) options_.log(msg);
  }

  Dataset dataset(StreamId split, double snr_db, std::vector<std::size_t> strata, std::size_t count) {
    const auto path = dir_ / "data" /
                      (split_name(split) + "_snr" + fmt_double("%g", snr_db) + "_k" + strata_name(strata) + "_n" +
                       std::to_string(count) + ".wssd");
    const std::uint64_t hash = data_hash(cfg_);
    if (options_.resume && std::filesystem::exists(path)) {
      Dataset ds = load_dataset(path);
      if (ds.meta.config_hash == hash && ds.size() == count) return ds;
    }
    const auto t0 = Clock::now();
    Dataset ds = generate(split, snr_db, strata, count);
    save_dataset(ds, path);
    log("generated " + path.filename().string() + " in " + fmt_double("%.1f", seconds_since(t0)) + " s");
    return ds;
  }

  Dataset generate(StreamId split, double snr_db, std::span<const std::size_t> strata, std::size_t count) const {
    Dataset ds = gen_.make_dataset(cfg_.seed, split, count, snr_db, stratified_occupancy(strata, count),
                                   cfg_.runtime.workers);
    ds.meta.config_hash = data_hash(cfg_);
    ds.meta.occupied = strata.size() == 1 ? static_cast<std::uint32_t>(strata[0]) : 0;
    return ds;
  }

  std::filesystem::path model_path(const std::string& stage) const { return dir_ / "models" / (stage + ".ckpt"); }

  std::optional<Model> cached_model(const std::string& stage) const {
    if (!options_.resume) return std::nullopt;
    const auto stamp = dir_ / "models" / (stage + ".stamp");
    if (!std::filesystem::exists(stamp) || !std::filesystem::exists(model_path(stage))) return std::nullopt;
    if (read_text(stamp) != stamp_) return std::nullopt;
    log("[" + stage + "] reusing checkpoint");
    return load_checkpoint(model_path(stage));
  }

  void store_model(const std::string& stage, const Model& model, const std::vector<EpochRecord>& history) {
    save_checkpoint(model, model_path(stage));
    std::string h = "epoch,train_loss,val_loss\n";
    for (const auto& e : history) {
      h += std::to_string(e.epoch) + "," + fmt_double("%.9g", e.train_loss) + "," + fmt_double("%.9g", e.val_loss) + "\n";
    }
    write_text(dir_ / "models" / (stage + ".history.csv"), h);
    write_text(dir_ / "models" / (stage + ".stamp"), stamp_);
  }

  std::uint64_t stage_seed(StreamId stream, const std::string& stage) const {
    return derive_seed(cfg_.seed, static_cast<std::uint64_t>(stream), stable_hash(stage));
  }

  EpochCallback epoch_logger(const std::string& stage) const {
    if (!options_.log) return {};
    return [this, stage](const EpochRecord& e) {
      log("[" + stage + "] epoch " + std::to_string(e.epoch) + " train " + fmt_double("%.4f", e.train_loss) + " val " +
          fmt_double("%.4f", e.val_loss));
    };
  }

  void timing(const std::string& stage, double seconds) {
    timings_ += stage + "," + fmt_double("%.3f", seconds) + "\n";
    write_text(dir_ / "timings.csv", "stage,seconds\n" + timings_);
  }

  void publish(const PipelineResult& result) const {
    write_text(dir_ / "results.csv", format_results_csv(result.rows));
    json rows = json::array();
    for (const auto& r : result.rows) rows.push_back(row_to_json(r));
    const json doc = {{"preset", cfg_.preset}, {"config_hash", stamp_}, {"rows", rows}};
    write_text(dir_ / "results.json", doc.dump(2) + "\n");
    write_text(dir_ / "roc.csv", format_roc_csv(result.roc));
  }

 private:
  ExperimentConfig cfg_;
  PipelineOptions options_;
  std::filesystem::path dir_;
  std::string stamp_;
  SampleGenerator gen_;
  std::string timings_;
};

class Runner {
 public:
  Runner(const ExperimentConfig& cfg, const PipelineOptions& options) : ws_(cfg, options), cfg_(cfg) {}

  PipelineResult run() {
    const double S = cfg_.snr_db;
    const std::vector<std::size_t> K{cfg_.occupied};
    const Dataset train_set = ws_.dataset(StreamId::kTrain, S, K, cfg_.sizes.train);
    const Dataset val_set = ws_.dataset(StreamId::kValidation, S, K, cfg_.sizes.validation);
    const Dataset test_set = ws_.dataset(StreamId::kTest, S, K, cfg_.sizes.test);

    const Model ca = train_stage("ca-wssnet", Variant::kCaWssNet, train_set, val_set);
    evaluate("CA-WSSNet", ca, test_set, S, cfg_.occupied, true);
    const Model pca = prune_stage("pca-wssnet", ca, train_set, val_set);
    evaluate("PCA-WSSNet", pca, test_set, S, cfg_.occupied, true);
    somp("SOMP", S, K);

    std::optional<Model> mlp;
    if (cfg_.experiments.ablation) {
      mlp = train_stage("mlp-wssnet", Variant::kMlpWssNet, train_set, val_set);
      evaluate("MLP-WSSNet", *mlp, test_set, S, cfg_.occupied, true);
    }

    for (const double snr : cfg_.experiments.snr_sweep) {
      if (snr == S) continue;
      const Dataset t = ws_.dataset(StreamId::kTest, snr, K, cfg_.sizes.test);
      evaluate("CA-WSSNet", ca, t, snr, cfg_.occupied, true);
      evaluate("PCA-WSSNet", pca, t, snr, cfg_.occupied, true);
      if (mlp) evaluate("MLP-WSSNet", *mlp, t, snr, cfg_.occupied, true);
      somp("SOMP", snr, K);
    }

    if (cfg_.experiments.occupancy_sweep) {
      const double snr = cfg_.experiments.occupancy_snr_db;
      const Model all = all_case(snr);
      for (const std::size_t k : cfg_.experiments.occupancy_list) {
        const Dataset t = ws_.dataset(StreamId::kTest, snr, {k}, cfg_.sizes.test);
        evaluate("PCA-WSSNet(all-case)", all, t, snr, k, false);
        somp("SOMP", snr, {k});
      }
    }

    if (cfg_.experiments.transfer) transfer(ca, pca);
    return result_;
  }

 private:
  Model train_stage(const std::string& stage, Variant variant, const Dataset& train_set, const Dataset& val_set) {
    if (auto m = ws_.cached_model(stage)) return *m;
    ws_.log("[" + stage + "] training on " + std::to_string(train_set.size()) + " samples");
    const auto t0 = Clock::now();
    Rng init = child_stream(cfg_.seed, StreamId::kInit, stable_hash(stage));
    TrainSpec spec = cfg_.train;
    spec.seed = ws_.stage_seed(StreamId::kShuffle, stage);
    TrainResult r =
        train(init_model(architecture(cfg_, variant), init), train_set, val_set, spec, LayerSet::all(), ws_.epoch_logger(stage));
    ws_.log("[" + stage + "] best epoch " + std::to_string(r.best_epoch) + " of " + std::to_string(r.history.size()));
    ws_.store_model(stage, r.model, r.history);
    ws_.timing(stage, seconds_since(t0));
    return r.model;
  }

  Model prune_stage(const std::string& stage, const Model& source, const Dataset& train_set, const Dataset& val_set) {
    if (auto m = ws_.cached_model(stage)) return *m;
    const auto t0 = Clock::now();
    std::vector<LayerPruneReport> report;
    const Model pruned = prune(source, cfg_.prune, &report);
    for (const auto& r : report) {
      ws_.log("[" + stage + "] layer " + std::to_string(r.layer) + " threshold " + fmt_double("%.6g", r.threshold) +
              " keeps " + std::to_string(r.survivors) + "/" + std::to_string(r.total));
    }
    TrainResult r = finetune(pruned, train_set, val_set, cfg_.prune, ws_.stage_seed(StreamId::kShuffle, stage),
                             ws_.epoch_logger(stage));
    ws_.store_model(stage, r.model, r.history);
    ws_.timing(stage, seconds_since(t0));
    return r.model;
  }

  Model adapt_stage(const std::string& stage, const Model& source, const Dataset& adaptation_set) {
    if (auto m = ws_.cached_model(stage)) return *m;
    const auto t0 = Clock::now();
    std::vector<EpochRecord> history;
    Model m = adapt(source, adaptation_set, cfg_.transfer.spec, ws_.stage_seed(StreamId::kShuffle, stage),
                    [&](const EpochRecord& e) { history.push_back(e); });
    ws_.store_model(stage, m, history);
    ws_.timing(stage, seconds_since(t0));
    return m;
  }

  // Trains and prunes on a training set stratified over the occupancy list.
  Model all_case(double snr) {
    const std::string tag = "allcase-snr" + fmt_double("%g", snr);
    const auto& strata = cfg_.experiments.occupancy_list;
    const Dataset tr = ws_.dataset(StreamId::kTrain, snr, strata, cfg_.sizes.train);
    const Dataset va = ws_.dataset(StreamId::kValidation, snr, strata, cfg_.sizes.validation);
    const Model ca = train_stage("ca-" + tag, Variant::kCaWssNet, tr, va);
    return prune_stage("pca-" + tag, ca, tr, va);
  }

  void transfer(const Model& ca, const Model& pca) {
    const double S = cfg_.snr_db;
    const std::size_t kt = cfg_.transfer.target_occupied;
    const std::vector<std::size_t> K{kt};
    const Dataset test_t = ws_.dataset(StreamId::kTest, S, K, cfg_.sizes.test);
    evaluate("w/o TL", pca, test_t, S, kt, false);

    const Dataset tr = ws_.dataset(StreamId::kTrain, S, K, cfg_.sizes.train);
    const Dataset va = ws_.dataset(StreamId::kValidation, S, K, cfg_.sizes.validation);
    const std::string tag = "k" + std::to_string(kt);
    const Model matched = prune_stage("pca-matched-" + tag, train_stage("ca-matched-" + tag, Variant::kCaWssNet, tr, va), tr, va);
    evaluate("Matched training", matched, test_t, S, kt, false);
    evaluate("All-case training", all_case(S), test_t, S, kt, false);

    const auto& sizes = cfg_.transfer.adaptation_sizes;
    if (sizes.empty()) return;
    const Dataset ad = ws_.dataset(StreamId::kAdaptation, S, K, *std::max_element(sizes.begin(), sizes.end()));
    for (const std::size_t n : sizes) {
      const Dataset subset = ad.head(n);
      const std::string suffix = "(n_ad=" + std::to_string(n) + ")";
      evaluate("PTL" + suffix, adapt_stage("ptl-" + tag + "-n" + std::to_string(n), pca, subset), test_t, S, kt, false);
      evaluate("DTL" + suffix, adapt_stage("dtl-" + tag + "-n" + std::to_string(n), ca, subset), test_t, S, kt, false);
    }
  }

  void evaluate(const std::string& scheme, const Model& model, const Dataset& test_set, double snr, std::size_t k,
                bool with_roc) {
    const NetworkEvaluation ev = evaluate_network(model, test_set, cfg_.evaluation.threshold);
    const CostReport cost = count_cost(model);
    ResultRow row{scheme, snr, k, cfg_.evaluation.threshold, ev.metrics.p_d, ev.metrics.p_f, ev.metrics.p_acc,
                  cost.param_nonzero, cost.flops, std::nullopt};
    if (cfg_.runtime.emit_wall_clock) row.wall_clock_ms = 1e3 * ev.seconds / static_cast<double>(test_set.size());
    if (with_roc) {
      const auto grid = threshold_grid(cfg_.evaluation.roc_points);
      for (const auto& p : roc_sweep(ev.probabilities, test_set, grid)) result_.roc.push_back({scheme, snr, k, p});
    }
    add(row);
  }

  void somp(const std::string& scheme, double snr, const std::vector<std::size_t>& strata) {
    const SompEvaluation ev = evaluate_somp(cfg_, StreamId::kTest, snr, strata, cfg_.sizes.test);
    if (ev.degraded > 0) ws_.log("SOMP stopped early on " + std::to_string(ev.degraded) + " samples");
    ResultRow row{scheme, snr, strata.size() == 1 ? strata[0] : 0, cfg_.evaluation.threshold, ev.metrics.p_d,
                  ev.metrics.p_f, ev.metrics.p_acc, std::nullopt, std::nullopt, std::nullopt};
    if (cfg_.runtime.emit_wall_clock) row.wall_clock_ms = 1e3 * ev.seconds / static_cast<double>(cfg_.sizes.test);
    add(row);
  }

  void add(const ResultRow& row) {
    ws_.log(row.scheme + " snr " + fmt_double("%g", row.snr_db) + " K " + std::to_string(row.k) + ": P_acc " +
            fmt_double("%.4f", row.p_acc) + " P_d " + fmt_double("%.4f", row.p_d) + " P_f " +
            fmt_double("%.4f", row.p_f));
    result_.rows.push_back(row);
    ws_.publish(result_);
  }

  Workspace ws_;
  const ExperimentConfig& cfg_;
  PipelineResult result_;
};

}  // namespace

std::string format_results_csv(std::span<const ResultRow> rows) {
  std::string out(kResultsCsvHeader);
  out += "\n";
  for (const auto& r : rows) {
    out += r.scheme + "," + fmt_double("%g", r.snr_db) + "," + std::to_string(r.k) + "," + fmt_double("%g", r.threshold) +
           "," + fmt_double("%.6f", r.p_d) + "," + fmt_double("%.6f", r.p_f) + "," + fmt_double("%.6f", r.p_acc) + "," +
           (r.params ? std::to_string(*r.params) : "") + "," + (r.flops ? std::to_string(*r.flops) : "") + "," +
           (r.wall_clock_ms ? fmt_double("%.4f", *r.wall_clock_ms) : "") + "\n";
  }
  return out;
}

std::string format_roc_csv(std::span<const RocRow> rows) {
  std::string out = "scheme,snr_db,k,lambda,p_d,p_f\n";
  for (const auto& r : rows) {
    out += r.scheme + "," + fmt_double("%g", r.snr_db) + "," + std::to_string(r.k) + "," +
           fmt_double("%.9g", r.point.threshold) + "," + fmt_double("%.6f", r.point.p_d) + "," +
           fmt_double("%.6f", r.point.p_f) + "\n";
  }
  return out;
}

std::vector<ResultRow> load_results(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  std::vector<ResultRow> rows;
  for (const auto& j : doc.at("rows")) rows.push_back(row_from_json(j));
  return rows;
}

std::vector<std::size_t> stratified_occupancy(std::span<const std::size_t> strata, std::size_t count) {
  if (strata.empty()) throw std::invalid_argument("stratified_occupancy: no strata");
  std::vector<std::size_t> k(count);
  for (std::size_t i = 0; i < count; ++i) k[i] = strata[i % strata.size()];
  return k;
}

Dataset generate_dataset(const ExperimentConfig& cfg, StreamId split, double snr_db,
                         std::span<const std::size_t> strata, std::size_t count) {
  cfg.validate();
  Dataset ds = sample_generator(cfg).make_dataset(cfg.seed, split, count, snr_db, stratified_occupancy(strata, count),
                                                  cfg.runtime.workers);
  ds.meta.config_hash = data_hash(cfg);
  ds.meta.occupied = strata.size() == 1 ? static_cast<std::uint32_t>(strata[0]) : 0;
  return ds;
}

SompEvaluation evaluate_somp(const ExperimentConfig& cfg, StreamId split, double snr_db,
                             std::span<const std::size_t> strata, std::size_t count) {
  const SampleGenerator gen = sample_generator(cfg);
  const auto ks = stratified_occupancy(strata, count);
  std::vector<OccupancyVector> predicted(count), truth(count);
  std::vector<std::uint8_t> degraded(count, 0);
  std::vector<double> busy(std::max(1u, cfg.runtime.workers), 0.0);
  const auto work = [&](std::size_t worker, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Sample s = gen.make(cfg.seed, split, i, snr_db, ks[i]);
      const auto t0 = Clock::now();
      const Eigen::MatrixXcd Y = branch_spectra(s.branches, gen.matrix().pattern());
      const SompResult r = somp_detect(Y, gen.matrix(), s.occupancy.popcount());
      busy[worker] += seconds_since(t0);
      predicted[i] = r.occupancy;
      truth[i] = s.occupancy;
      degraded[i] = r.degraded ? 1 : 0;
    }
  };
  const std::size_t workers = busy.size();
  if (workers == 1 || count < 2) {
    work(0, 0, count);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t b = std::min(count, w * chunk);
      const std::size_t e = std::min(count, b + chunk);
      if (b < e) pool.emplace_back(work, w, b, e);
    }
  }
  SompEvaluation ev;
  ev.metrics = metrics(predicted, truth);
  for (const auto d : degraded) ev.degraded += d;
  for (const auto t : busy) ev.seconds += t;
  return ev;
}

NetworkEvaluation evaluate_network(const Model& model, const Dataset& test_set, double threshold) {
  NetworkEvaluation ev;
  const auto t0 = Clock::now();
  ev.probabilities = predict(model, test_set);
  ev.seconds = seconds_since(t0);
  ev.metrics = metrics(ev.probabilities, test_set, threshold);
  return ev;
}

PipelineResult run_pipeline(const ExperimentConfig& cfg, const PipelineOptions& options) {
  cfg.validate();
  return Runner(cfg, options).run();
}

}  // namespace wss
