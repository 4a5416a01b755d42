#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "oracles.hpp"
#include "wss/multicoset.hpp"
#include "wss/rng.hpp"
#include "wss/signal_synth.hpp"

using namespace wss;

namespace {

std::vector<std::size_t> iota_offsets(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

NyquistSequence ramp(std::size_t n) {
  NyquistSequence x;
  for (std::size_t m = 0; m < n; ++m) x.samples.emplace_back(static_cast<double>(m), 0.0);
  return x;
}

}  // namespace

TEST_SUITE("multicoset") {

TEST_CASE("coset pattern validation") {
  CHECK(CosetPattern({3, 1}, 4).offsets() == std::vector<std::size_t>{1, 3});
  CHECK_THROWS_AS(CosetPattern({1, 1}, 4), std::invalid_argument);
  CHECK_THROWS_AS(CosetPattern({4}, 4), std::invalid_argument);
  CHECK_THROWS_AS(CosetPattern({}, 4), std::invalid_argument);
  Rng rng(1);
  const CosetPattern p = draw_coset_pattern(40, 16, rng);
  CHECK(p.num_cosets() == 16);
  for (std::size_t i = 1; i < 16; ++i) CHECK(p.offsets()[i - 1] < p.offsets()[i]);
  CHECK(p.offsets().back() <= 39);
}

TEST_CASE("measurement matrix entries and pseudo-inverse") {
  Rng rng(2);
  const double T = 1.0 / 320e6;
  const MeasurementMatrix A(draw_coset_pattern(40, 16, rng), T);
  const double mag = 1.0 / (40 * T);
  CHECK((A.matrix().cwiseAbs().array() - mag).abs().maxCoeff() < 1e-9 * mag);
  const auto& M = A.matrix();
  const auto& Pi = A.pinv();
  CHECK((Pi * M * Pi - Pi).norm() <= 1e-9 * Pi.norm());
  CHECK((M * Pi * M - M).norm() <= 1e-9 * M.norm());
  CHECK(A.rank() == 16);

  const MeasurementMatrix zero_row(CosetPattern({0, 5}, 8), T);
  const double m8 = 1.0 / (8 * T);
  for (Eigen::Index l = 0; l < 8; ++l) CHECK(zero_row.matrix()(0, l) == std::complex<double>(m8, 0.0));
  CHECK(std::arg(zero_row.matrix()(1, 1)) == doctest::Approx(2.0 * M_PI * 5.0 / 8.0 - 2.0 * M_PI));

  const MeasurementMatrix full(CosetPattern(iota_offsets(8), 8), T);
  CHECK((full.pinv() * full.matrix() - Eigen::MatrixXcd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-9);
  CHECK_THROWS_AS(CosetPattern({2, 2}, 8), std::invalid_argument);
}

TEST_CASE("pseudo-inverse of a rank-deficient matrix") {
  Eigen::MatrixXcd m(2, 2);
  m << 1.0, 2.0, 2.0, 4.0;
  std::size_t rank = 0;
  const Eigen::MatrixXcd p = pseudo_inverse(m, 1e-10, &rank);
  CHECK(rank == 1);
  CHECK((m * p * m - m).norm() < 1e-12);
}

TEST_CASE("coset_sample indexing") {
  const auto y = coset_sample(ramp(8), CosetPattern({1, 3}, 4), 2);
  REQUIRE(y.rows() == 2);
  REQUIRE(y.cols() == 2);
  CHECK(y(0, 0) == cdouble(1.0));
  CHECK(y(0, 1) == cdouble(5.0));
  CHECK(y(1, 0) == cdouble(3.0));
  CHECK(y(1, 1) == cdouble(7.0));

  const auto full = coset_sample(ramp(10), CosetPattern({0}, 1), 6);
  for (Eigen::Index n = 0; n < 6; ++n) CHECK(full(0, n) == cdouble(static_cast<double>(n)));

  Rng rng(3);
  const CosetPattern p = draw_coset_pattern(40, 16, rng);
  const auto big = coset_sample(ramp(2560), p, 64);
  CHECK(big.rows() == 16);
  CHECK(big.cols() == 64);
  for (Eigen::Index r = 0; r < 16; ++r)
    for (Eigen::Index n = 0; n < 64; ++n)
      CHECK(big(r, n).real() == static_cast<double>(n * 40 + static_cast<Eigen::Index>(p.offsets()[r])));
  CHECK_THROWS_AS(coset_sample(ramp(7), CosetPattern({1, 3}, 4), 2), std::invalid_argument);
}

TEST_CASE("branch spectra") {
  const CosetPattern p({0, 2}, 4);
  CosetSequences y = CosetSequences::Zero(2, 8);
  y.row(0).setOnes();
  const Eigen::MatrixXcd out = branch_spectra(y, p);
  CHECK(std::abs(out(0, 0) - cdouble(8.0)) < 1e-12);
  for (Eigen::Index n = 1; n < 8; ++n) CHECK(std::abs(out(0, n)) < 1e-12);
  CHECK(out.row(1).cwiseAbs().maxCoeff() == 0.0);

  Rng rng(4);
  std::normal_distribution<double> g;
  CosetSequences r(2, 8);
  for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = cdouble(g(rng), g(rng));
  const Eigen::MatrixXcd s = branch_spectra(r, p);
  for (Eigen::Index n = 0; n < 8; ++n) {
    cdouble dft{};
    for (Eigen::Index m = 0; m < 8; ++m) dft += r(0, m) * std::polar(1.0, -2.0 * M_PI * n * m / 8.0);
    CHECK(std::abs(s(0, n) - dft) < 1e-12);
    cdouble dft1{};
    for (Eigen::Index m = 0; m < 8; ++m) dft1 += r(1, m) * std::polar(1.0, -2.0 * M_PI * n * m / 8.0);
    // f_n·c_p·T = n·2/(8·4).
    CHECK(std::abs(s(1, n) - std::polar(1.0, -2.0 * M_PI * n * 2.0 / 32.0) * dft1) < 1e-12);
  }
}

TEST_CASE("coarse estimate reproduces the folded full-rate spectrum") {
  CHECK(wss::testing::max_folding_error(8, 16, 100, 1) <= 1e-6);
  CHECK(wss::testing::max_folding_error(40, 64, 3, 2) <= 1e-6);
}

TEST_CASE("full coset estimate peaks at the occupied sub-band") {
  const SpectrumConfig cfg = wss::testing::small_spectrum(8, 16);
  const MeasurementMatrix A(CosetPattern(iota_offsets(8), 8), cfg.nyquist_interval_s());
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    const OccupancyVector o = draw_occupancy(8, 1, rng);
    const auto x = synth_signal(o, draw_pu_params(o, cfg, rng), cfg);
    const Eigen::MatrixXcd xhat = coarse_estimate(coset_sample(x, A.pattern(), 16), A);
    Eigen::Index best = 0;
    xhat.rowwise().squaredNorm().maxCoeff(&best);
    CHECK(o[static_cast<std::size_t>(best)]);
  }
}

TEST_CASE("preprocess normalization") {
  Rng rng(6);
  const SpectrumConfig cfg;
  const MeasurementMatrix A(draw_coset_pattern(40, 16, rng), cfg.nyquist_interval_s());
  const FeatureTensor zero = preprocess(CosetSequences::Zero(16, 64), A);
  CHECK(zero.rows() == 40);
  CHECK(zero.cols() == 64);
  CHECK(zero.data().size() == 40 * 64 * 2);
  for (const double v : zero.data()) CHECK(v == 0.0);

  const OccupancyVector o = draw_occupancy(40, 12, rng);
  const auto x = add_awgn(synth_signal(o, draw_pu_params(o, cfg, rng), cfg), 8.0, rng);
  const CosetSequences y = coset_sample(x, A.pattern(), 64);
  const FeatureTensor f = preprocess(y, A);
  for (std::size_t l = 0; l < 40; ++l)
    for (std::size_t n = 0; n < 64; ++n) {
      const double m = std::hypot(f.at(l, n, 0), f.at(l, n, 1));
      CHECK((m == 0.0 || std::abs(m - 1.0) <= 1e-6));
    }

  const FeatureTensor scaled = preprocess(CosetSequences(y * 3.7), A);
  for (std::size_t i = 0; i < f.data().size(); ++i) CHECK(scaled.data()[i] == doctest::Approx(f.data()[i]).epsilon(1e-9));

  Eigen::MatrixXcd tiny(1, 2);
  tiny << cdouble(1e-13, 0.0), cdouble(0.0, -2.0);
  const FeatureTensor t = normalize_estimate(tiny);
  CHECK(t.at(0, 0, 0) == 0.0);
  CHECK(t.at(0, 0, 1) == 0.0);
  CHECK(t.at(0, 1, 0) == 0.0);
  CHECK(t.at(0, 1, 1) == -1.0);
}

TEST_CASE("coarse estimate is linear in the branch samples") {
  Rng rng(7);
  const MeasurementMatrix A(draw_coset_pattern(40, 16, rng), 1.0 / 320e6);
  std::normal_distribution<double> g;
  CosetSequences a(16, 64), b(16, 64);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    a.data()[i] = cdouble(g(rng), g(rng));
    b.data()[i] = cdouble(g(rng), g(rng));
  }
  const Eigen::MatrixXcd lhs = coarse_estimate(CosetSequences(2.0 * a + b), A);
  const Eigen::MatrixXcd rhs = 2.0 * coarse_estimate(a, A) + coarse_estimate(b, A);
  CHECK(wss::testing::relative_error(lhs, rhs) < 1e-12);
}

}  // TEST_SUITE
