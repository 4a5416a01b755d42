#include "wss/dataset.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>
#include <thread>

#include "detail/binary_io.hpp"

namespace wss {

namespace {
constexpr std::array<char, 8> kDatasetMagic = {'W', 'S', 'S', 'D', 'A', 'T', 'A', '1'};
constexpr std::uint32_t kDatasetVersion = 1;
}  // namespace

void Dataset::reserve(std::size_t n) {
  features_.reserve(n * feature_size());
  labels_.reserve(n * L_);
}

void Dataset::add(const FeatureTensor& x, const OccupancyVector& o) {
  if (x.rows() != L_ || x.cols() != N_ || o.size() != L_) {
    throw std::invalid_argument("Dataset::add: sample shape does not match the dataset");
  }
  for (double v : x.data()) features_.push_back(static_cast<float>(v));
  labels_.insert(labels_.end(), o.bits.begin(), o.bits.end());
}

void Dataset::add_raw(std::span<const float> features, std::span<const std::uint8_t> labels) {
  if (features.size() != feature_size() || labels.size() != L_) {
    throw std::invalid_argument("Dataset::add_raw: sample shape does not match the dataset");
  }
  features_.insert(features_.end(), features.begin(), features.end());
  labels_.insert(labels_.end(), labels.begin(), labels.end());
}

void Dataset::append(const Dataset& other) {
  if (other.L_ != L_ || other.N_ != N_) throw std::invalid_argument("Dataset::append: shape mismatch");
  features_.insert(features_.end(), other.features_.begin(), other.features_.end());
  labels_.insert(labels_.end(), other.labels_.begin(), other.labels_.end());
}

OccupancyVector Dataset::occupancy(std::size_t i) const {
  const auto l = labels(i);
  return OccupancyVector(std::vector<std::uint8_t>(l.begin(), l.end()));
}

Eigen::MatrixXd Dataset::label_matrix(std::span<const std::size_t> indices) const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(indices.size()), static_cast<Eigen::Index>(L_));
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto l = labels(indices[r]);
    for (std::size_t j = 0; j < L_; ++j) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = l[j];
  }
  return m;
}

Eigen::MatrixXd Dataset::label_matrix() const {
  std::vector<std::size_t> idx(size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return label_matrix(idx);
}

Dataset Dataset::head(std::size_t n) const {
  n = std::min(n, size());
  Dataset out(L_, N_);
  out.meta = meta;
  out.features_.assign(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(n * feature_size()));
  out.labels_.assign(labels_.begin(), labels_.begin() + static_cast<std::ptrdiff_t>(n * L_));
  return out;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  detail::write_atomically(path, [&](std::ofstream& os) {
    detail::BinaryWriter w(os);
    w.bytes(kDatasetMagic.data(), kDatasetMagic.size());
    w.put<std::uint32_t>(kDatasetVersion);
    w.put<std::uint64_t>(ds.meta.config_hash);
    w.put<std::uint64_t>(ds.meta.seed);
    w.put<std::uint32_t>(ds.meta.split);
    w.put<double>(ds.meta.snr_db);
    w.put<std::uint32_t>(ds.meta.occupied);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ds.rows()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ds.cols()));
    w.put<std::uint32_t>(2);
    w.put<std::uint64_t>(ds.size());
    w.bytes(ds.raw_features().data(), ds.raw_features().size() * sizeof(float));
    w.bytes(ds.raw_labels().data(), ds.raw_labels().size());
  });
}

Dataset load_dataset(const std::filesystem::path& path) {
  auto is = detail::open_for_reading(path);
  detail::BinaryReader r(is, path);
  std::array<char, 8> magic{};
  r.bytes(magic.data(), magic.size());
  if (magic != kDatasetMagic) throw std::runtime_error("not a dataset file: " + path.string());
  if (const auto v = r.get<std::uint32_t>(); v != kDatasetVersion) {
    throw std::runtime_error("unsupported dataset version " + std::to_string(v) + ": " + path.string());
  }
  DatasetMeta meta;
  meta.config_hash = r.get<std::uint64_t>();
  meta.seed = r.get<std::uint64_t>();
  meta.split = r.get<std::uint32_t>();
  meta.snr_db = r.get<double>();
  meta.occupied = r.get<std::uint32_t>();
  const auto L = r.get<std::uint32_t>();
  const auto N = r.get<std::uint32_t>();
  if (r.get<std::uint32_t>() != 2) throw std::runtime_error("dataset channel count must be 2: " + path.string());
  const auto count = r.get<std::uint64_t>();
  Dataset ds(L, N);
  ds.meta = meta;
  std::vector<float> features(count * ds.feature_size());
  std::vector<std::uint8_t> labels(count * L);
  r.bytes(features.data(), features.size() * sizeof(float));
  r.bytes(labels.data(), labels.size());
  if (!r.at_end()) throw std::runtime_error("trailing bytes in dataset file: " + path.string());
  ds.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < L; ++j)
      if (labels[i * L + j] > 1) throw std::runtime_error("label byte outside {0,1}: " + path.string());
    ds.add_raw({features.data() + i * ds.feature_size(), ds.feature_size()}, {labels.data() + i * L, L});
  }
  return ds;
}

SampleGenerator::SampleGenerator(SpectrumConfig spectrum, MeasurementMatrix matrix, std::size_t samples_per_coset)
    : spectrum_(spectrum), matrix_(std::move(matrix)), N_(samples_per_coset) {
  spectrum_.validate();
  if (matrix_.pattern().num_subbands() != spectrum_.num_subbands) {
    throw std::invalid_argument("coset pattern L differs from the spectrum configuration");
  }
  if (N_ * spectrum_.num_subbands > spectrum_.nyquist_samples()) {
    throw std::invalid_argument("N·L exceeds the Nyquist samples in the sensing window");
  }
}

Sample SampleGenerator::make(std::uint64_t master_seed, StreamId split, std::size_t index, double snr_db,
                             std::size_t K) const {
  Rng rng = child_stream(master_seed, split, index);
  Sample s;
  s.occupancy = draw_occupancy(spectrum_.num_subbands, K, rng);
  const auto pus = draw_pu_params(s.occupancy, spectrum_, rng);
  NyquistSequence x = synth_signal(s.occupancy, pus, spectrum_);
  if (K > 0) x = add_awgn(x, snr_db, rng);
  s.branches = coset_sample(x, matrix_.pattern(), N_);
  s.features = preprocess(s.branches, matrix_);
  return s;
}

Dataset SampleGenerator::make_dataset(std::uint64_t master_seed, StreamId split, std::size_t count, double snr_db,
                                      const std::vector<std::size_t>& occupied, unsigned workers) const {
  if (occupied.size() != count) throw std::invalid_argument("make_dataset: one K per sample required");
  const std::size_t L = spectrum_.num_subbands;
  const std::size_t fsize = L * N_ * 2;
  std::vector<float> features(count * fsize);
  std::vector<std::uint8_t> labels(count * L);
  const auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Sample s = make(master_seed, split, i, snr_db, occupied[i]);
      for (std::size_t j = 0; j < fsize; ++j) features[i * fsize + j] = static_cast<float>(s.features.data()[j]);
      std::copy(s.occupancy.bits.begin(), s.occupancy.bits.end(), labels.begin() + static_cast<std::ptrdiff_t>(i * L));
    }
  };
  workers = std::max(1u, workers);
  if (workers == 1 || count < 2) {
    work(0, count);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (count + workers - 1) / workers;
    for (std::size_t b = 0; b < count; b += chunk) pool.emplace_back(work, b, std::min(count, b + chunk));
  }
  Dataset ds(L, N_);
  ds.reserve(count);
  for (std::size_t i = 0; i < count; ++i) ds.add_raw({features.data() + i * fsize, fsize}, {labels.data() + i * L, L});
  ds.meta.seed = master_seed;
  ds.meta.split = static_cast<std::uint32_t>(split);
  ds.meta.snr_db = snr_db;
  const bool uniform = !occupied.empty() && std::all_of(occupied.begin(), occupied.end(),
                                                         [&](std::size_t k) { return k == occupied.front(); });
  ds.meta.occupied = uniform ? static_cast<std::uint32_t>(occupied.front()) : 0;
  return ds;
}

Dataset SampleGenerator::make_dataset(std::uint64_t master_seed, StreamId split, std::size_t count, double snr_db,
                                      std::size_t K, unsigned workers) const {
  return make_dataset(master_seed, split, count, snr_db, std::vector<std::size_t>(count, K), workers);
}

}  // namespace wss
