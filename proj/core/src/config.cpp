#include "wss/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "detail/binary_io.hpp"

namespace wss {

namespace {

using nlohmann::json;

json to_json_object(const ExperimentConfig& c) {
  json j;
  j["preset"] = c.preset;
  j["seed"] = c.seed;
  j["spectrum"] = {{"total_bandwidth_hz", c.spectrum.total_bandwidth_hz},
                   {"num_subbands", c.spectrum.num_subbands},
                   {"window_duration_s", c.spectrum.window_duration_s}};
  j["sampling"] = {{"branches", c.sampling.branches},
                   {"samples_per_coset", c.sampling.samples_per_coset},
                   {"coset_offsets", c.sampling.coset_offsets}};
  j["occupied"] = c.occupied;
  j["snr_db"] = c.snr_db;
  j["dataset"] = {{"train", c.sizes.train}, {"validation", c.sizes.validation}, {"test", c.sizes.test}};
  j["network"] = {{"attention_channels", c.network.attention_channels}, {"fc_width", c.network.fc_width}};
  j["train"] = {{"learning_rate", c.train.learning_rate},
                {"beta1", c.train.adam.beta1},
                {"beta2", c.train.adam.beta2},
                {"epsilon", c.train.adam.epsilon},
                {"batch_size", c.train.batch_size},
                {"max_epochs", c.train.max_epochs},
                {"patience", c.train.patience},
                {"early_stopping", c.train.early_stopping}};
  j["prune"] = {{"ratio", c.prune.ratio},
                {"layers", c.prune.layers},
                {"finetune_epochs", c.prune.finetune_epochs},
                {"finetune_learning_rate", c.prune.finetune_learning_rate},
                {"batch_size", c.prune.batch_size}};
  j["transfer"] = {{"learning_rate", c.transfer.spec.learning_rate},
                   {"epochs", c.transfer.spec.epochs},
                   {"max_batch_size", c.transfer.spec.max_batch_size},
                   {"target_occupied", c.transfer.target_occupied},
                   {"adaptation_sizes", c.transfer.adaptation_sizes}};
  j["evaluation"] = {{"threshold", c.evaluation.threshold}, {"roc_points", c.evaluation.roc_points}};
  j["experiments"] = {{"ablation", c.experiments.ablation},
                      {"snr_sweep", c.experiments.snr_sweep},
                      {"occupancy_sweep", c.experiments.occupancy_sweep},
                      {"occupancy_snr_db", c.experiments.occupancy_snr_db},
                      {"occupancy_list", c.experiments.occupancy_list},
                      {"transfer", c.experiments.transfer}};
  j["runtime"] = {{"output_dir", c.runtime.output_dir},
                  {"workers", c.runtime.workers},
                  {"emit_wall_clock", c.runtime.emit_wall_clock}};
  return j;
}

// Every key of `ref` must be present in `j` and vice versa, recursively
// through objects.
void check_keys(const json& j, const json& ref, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument("config: '" + where + "' must be an object");
  for (const auto& [key, value] : ref.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!j.contains(key)) throw std::invalid_argument("config: missing key '" + path + "'");
    if (value.is_object()) check_keys(j.at(key), value, path);
  }
  for (const auto& [key, value] : j.items()) {
    if (!ref.contains(key)) {
      throw std::invalid_argument("config: unknown key '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw std::invalid_argument("config: bad value for '" + where + "." + key + "': " + e.what());
  }
}

ExperimentConfig from_json_object(const json& j) {
  check_keys(j, to_json_object(paper_preset()), "");
  ExperimentConfig c;
  read(j, "preset", c.preset, "");
  read(j, "seed", c.seed, "");
  read(j, "occupied", c.occupied, "");
  read(j, "snr_db", c.snr_db, "");
  const auto& sp = j.at("spectrum");
  read(sp, "total_bandwidth_hz", c.spectrum.total_bandwidth_hz, "spectrum");
  read(sp, "num_subbands", c.spectrum.num_subbands, "spectrum");
  read(sp, "window_duration_s", c.spectrum.window_duration_s, "spectrum");
  const auto& sa = j.at("sampling");
  read(sa, "branches", c.sampling.branches, "sampling");
  read(sa, "samples_per_coset", c.sampling.samples_per_coset, "sampling");
  read(sa, "coset_offsets", c.sampling.coset_offsets, "sampling");
  const auto& ds = j.at("dataset");
  read(ds, "train", c.sizes.train, "dataset");
  read(ds, "validation", c.sizes.validation, "dataset");
  read(ds, "test", c.sizes.test, "dataset");
  const auto& nw = j.at("network");
  read(nw, "attention_channels", c.network.attention_channels, "network");
  read(nw, "fc_width", c.network.fc_width, "network");
  const auto& tr = j.at("train");
  read(tr, "learning_rate", c.train.learning_rate, "train");
  read(tr, "beta1", c.train.adam.beta1, "train");
  read(tr, "beta2", c.train.adam.beta2, "train");
  read(tr, "epsilon", c.train.adam.epsilon, "train");
  read(tr, "batch_size", c.train.batch_size, "train");
  read(tr, "max_epochs", c.train.max_epochs, "train");
  read(tr, "patience", c.train.patience, "train");
  read(tr, "early_stopping", c.train.early_stopping, "train");
  const auto& pr = j.at("prune");
  read(pr, "ratio", c.prune.ratio, "prune");
  read(pr, "layers", c.prune.layers, "prune");
  read(pr, "finetune_epochs", c.prune.finetune_epochs, "prune");
  read(pr, "finetune_learning_rate", c.prune.finetune_learning_rate, "prune");
  read(pr, "batch_size", c.prune.batch_size, "prune");
  const auto& tl = j.at("transfer");
  read(tl, "learning_rate", c.transfer.spec.learning_rate, "transfer");
  read(tl, "epochs", c.transfer.spec.epochs, "transfer");
  read(tl, "max_batch_size", c.transfer.spec.max_batch_size, "transfer");
  read(tl, "target_occupied", c.transfer.target_occupied, "transfer");
  read(tl, "adaptation_sizes", c.transfer.adaptation_sizes, "transfer");
  const auto& ev = j.at("evaluation");
  read(ev, "threshold", c.evaluation.threshold, "evaluation");
  read(ev, "roc_points", c.evaluation.roc_points, "evaluation");
  const auto& ex = j.at("experiments");
  read(ex, "ablation", c.experiments.ablation, "experiments");
  read(ex, "snr_sweep", c.experiments.snr_sweep, "experiments");
  read(ex, "occupancy_sweep", c.experiments.occupancy_sweep, "experiments");
  read(ex, "occupancy_snr_db", c.experiments.occupancy_snr_db, "experiments");
  read(ex, "occupancy_list", c.experiments.occupancy_list, "experiments");
  read(ex, "transfer", c.experiments.transfer, "experiments");
  const auto& rt = j.at("runtime");
  read(rt, "output_dir", c.runtime.output_dir, "runtime");
  read(rt, "workers", c.runtime.workers, "runtime");
  read(rt, "emit_wall_clock", c.runtime.emit_wall_clock, "runtime");
  c.validate();
  return c;
}

std::vector<double> snr_grid(double lo, double hi, double step) {
  std::vector<double> out;
  for (int i = 0; lo + i * step <= hi + 1e-9; ++i) out.push_back(lo + i * step);
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  spectrum.validate();
  const std::size_t L = spectrum.num_subbands;
  if (sampling.branches == 0 || sampling.branches > L) {
    throw std::invalid_argument("config: branch count must lie in [1, L]");
  }
  if (sampling.samples_per_coset == 0) throw std::invalid_argument("config: samples_per_coset must be positive");
  if (spectrum.nyquist_samples() != L * sampling.samples_per_coset) {
    throw std::invalid_argument("config: window holds " + std::to_string(spectrum.nyquist_samples()) +
                                " Nyquist samples, expected L*N = " + std::to_string(L * sampling.samples_per_coset));
  }
  if (!sampling.coset_offsets.empty()) {
    if (sampling.coset_offsets.size() != sampling.branches) {
      throw std::invalid_argument("config: coset_offsets must list exactly one offset per branch");
    }
    CosetPattern(sampling.coset_offsets, L);
  }
  if (occupied > L) throw std::invalid_argument("config: occupied exceeds the number of sub-bands");
  if (sizes.train == 0 || sizes.validation == 0 || sizes.test == 0) {
    throw std::invalid_argument("config: dataset sizes must be positive");
  }
  if (network.attention_channels == 0 || network.fc_width == 0) {
    throw std::invalid_argument("config: network widths must be positive");
  }
  train.validate();
  prune.validate();
  transfer.spec.validate();
  if (transfer.target_occupied > L) throw std::invalid_argument("config: target_occupied exceeds L");
  for (const auto n : transfer.adaptation_sizes) {
    if (n == 0) throw std::invalid_argument("config: adaptation sizes must be positive");
  }
  if (!(evaluation.threshold > 0.0 && evaluation.threshold < 1.0)) {
    throw std::invalid_argument("config: threshold must lie in (0, 1)");
  }
  if (evaluation.roc_points < 2) throw std::invalid_argument("config: roc_points must be at least 2");
  for (const auto k : experiments.occupancy_list) {
    if (k > L) throw std::invalid_argument("config: occupancy_list entry exceeds L");
  }
  if ((experiments.occupancy_sweep || experiments.transfer) && experiments.occupancy_list.empty()) {
    throw std::invalid_argument("config: occupancy_list is empty");
  }
  if (runtime.output_dir.empty()) throw std::invalid_argument("config: output_dir is empty");
  if (runtime.workers == 0) throw std::invalid_argument("config: workers must be positive");
}

ExperimentConfig paper_preset() {
  ExperimentConfig c;
  c.preset = "paper";
  c.experiments.snr_sweep = snr_grid(-10.0, 10.0, 2.0);
  return c;
}

ExperimentConfig desk_preset() {
  ExperimentConfig c = paper_preset();
  c.preset = "desk";
  c.sizes = {3000, 1000, 1000};
  c.train.learning_rate = 1e-4;
  c.train.max_epochs = 150;
  c.train.patience = 10;
  c.prune.finetune_epochs = 30;
  c.prune.finetune_learning_rate = 1e-4;
  c.transfer.spec.learning_rate = 1e-4;
  c.transfer.adaptation_sizes = {25, 50, 100, 200};
  c.runtime.output_dir = "runs/desk";
  return c;
}

ExperimentConfig preset(std::string_view name) {
  if (name == "paper") return paper_preset();
  if (name == "desk") return desk_preset();
  throw std::invalid_argument("unknown preset '" + std::string(name) + "' (expected paper or desk)");
}

std::string to_json(const ExperimentConfig& cfg) { return to_json_object(cfg).dump(2); }

ExperimentConfig config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  return from_json_object(j);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return config_from_json(ss.str());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path) {
  const std::string text = to_json(cfg) + "\n";
  detail::write_atomically(path, [&](std::ostream& os) { os.write(text.data(), static_cast<std::streamsize>(text.size())); });
}

ExperimentConfig with_override(const ExperimentConfig& cfg, std::string_view dotted_path, std::string_view value) {
  json j = to_json_object(cfg);
  json* node = &j;
  std::string path(dotted_path);
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key)) {
      throw std::invalid_argument("config: unknown key '" + path + "'");
    }
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = std::string(value);
  }
  *node = parsed;
  return from_json_object(j);
}

std::uint64_t stable_hash(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char ch : s) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  json j = to_json_object(cfg);
  j.erase("runtime");
  return stable_hash(j.dump());
}

std::uint64_t data_hash(const ExperimentConfig& cfg) {
  const json full = to_json_object(cfg);
  json j;
  j["seed"] = full["seed"];
  j["spectrum"] = full["spectrum"];
  j["sampling"] = full["sampling"];
  return stable_hash(j.dump());
}

std::string hex_hash(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Architecture architecture(const ExperimentConfig& cfg, Variant variant) {
  Architecture a;
  a.L = cfg.spectrum.num_subbands;
  a.N = cfg.sampling.samples_per_coset;
  a.attention_channels = cfg.network.attention_channels;
  a.fc_width = cfg.network.fc_width;
  a.variant = variant;
  return a;
}

CosetPattern coset_pattern(const ExperimentConfig& cfg) {
  if (!cfg.sampling.coset_offsets.empty()) return CosetPattern(cfg.sampling.coset_offsets, cfg.spectrum.num_subbands);
  Rng rng = child_stream(cfg.seed, StreamId::kCosetPattern, 0);
  return draw_coset_pattern(cfg.spectrum.num_subbands, cfg.sampling.branches, rng);
}

MeasurementMatrix measurement_matrix(const ExperimentConfig& cfg) {
  return MeasurementMatrix(coset_pattern(cfg), cfg.spectrum.nyquist_interval_s());
}

SampleGenerator sample_generator(const ExperimentConfig& cfg) {
  return SampleGenerator(cfg.spectrum, measurement_matrix(cfg), cfg.sampling.samples_per_coset);
}

}  // namespace wss
