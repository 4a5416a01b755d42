#include <doctest.h>

#include <algorithm>
#include <vector>

#include "wss/evalkit.hpp"
#include "wss/pruning.hpp"

using namespace wss;

namespace {

OccupancyVector occ(std::initializer_list<std::uint8_t> b) { return OccupancyVector(std::vector<std::uint8_t>(b)); }

Dataset labelled(const std::vector<OccupancyVector>& truth) {
  const std::size_t L = truth.front().size();
  Dataset ds(L, 1);
  for (const auto& o : truth) ds.add(FeatureTensor(L, 1), o);
  return ds;
}

}  // namespace

TEST_SUITE("evalkit") {

TEST_CASE("decision rule is strict") {
  const std::vector<double> half(40, 0.5);
  CHECK(decide(half, 0.5).popcount() == 0);
  const std::vector<double> two{0.9, 0.1};
  CHECK(decide(two, 0.5) == occ({1, 0}));
  CHECK(kDefaultThreshold == 0.5);
  CHECK_THROWS_AS(decide(two, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(decide(two, 1.0), std::invalid_argument);
}

TEST_CASE("hand-counted metrics") {
  const std::vector<OccupancyVector> pred{occ({1, 1, 0, 0})}, truth{occ({1, 0, 1, 0})};
  const Metrics m = metrics(pred, truth);
  CHECK(m.tp == 1);
  CHECK(m.fp == 1);
  CHECK(m.fn == 1);
  CHECK(m.tn == 1);
  CHECK(m.p_d == 0.5);
  CHECK(m.p_f == 0.5);
  CHECK(m.p_acc == 0.5);
}

TEST_CASE("perfect and accept-all predictors") {
  const std::vector<OccupancyVector> truth{occ({1, 0, 1, 0, 0}), occ({0, 0, 0, 1, 0})};
  const Metrics perfect = metrics(truth, truth);
  CHECK(perfect.p_d == 1.0);
  CHECK(perfect.p_f == 0.0);
  CHECK(perfect.p_acc == 1.0);
  const std::vector<OccupancyVector> ones(2, occ({1, 1, 1, 1, 1}));
  const Metrics all = metrics(ones, truth);
  CHECK(all.p_d == 1.0);
  CHECK(all.p_f == 1.0);
  CHECK(all.p_acc == doctest::Approx(3.0 / 10.0));
  CHECK((all.tp + all.tn) == 3);
}

TEST_CASE("undefined ratios are flagged") {
  const std::vector<OccupancyVector> zero{occ({0, 0})};
  const Metrics m = metrics(zero, zero);
  CHECK_FALSE(m.p_d_defined);
  CHECK(m.p_d == 0.0);
  CHECK(m.p_f_defined);
  CHECK(m.p_acc == 1.0);
}

TEST_CASE("roc sweep is monotone with the expected endpoints") {
  std::vector<OccupancyVector> truth;
  Eigen::MatrixXd scores(50, 6);
  Rng rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    OccupancyVector o(6);
    for (std::size_t l = 0; l < 6; ++l) {
      o.bits[l] = u(rng) < 0.3;
      scores(i, static_cast<Eigen::Index>(l)) = std::clamp(0.4 * o.bits[l] + 0.6 * u(rng), 1e-3, 1.0 - 1e-3);
    }
    truth.push_back(o);
  }
  const Dataset ds = labelled(truth);
  const auto grid = threshold_grid(101);
  CHECK(grid.front() > 0.0);
  CHECK(grid.back() < 1.0);
  const auto roc = roc_sweep(scores, ds, grid);
  REQUIRE(roc.size() == 101);
  CHECK(roc.front().p_d == 1.0);
  CHECK(roc.front().p_f == 1.0);
  CHECK(roc.back().p_d == 0.0);
  CHECK(roc.back().p_f == 0.0);
  for (std::size_t i = 1; i < roc.size(); ++i) {
    CHECK(roc[i].p_d <= roc[i - 1].p_d);
    CHECK(roc[i].p_f <= roc[i - 1].p_f);
  }
  const std::vector<double> unsorted{0.6, 0.4};
  CHECK_THROWS_AS(roc_sweep(scores, ds, unsorted), std::invalid_argument);
}

TEST_CASE("roc interpolation") {
  const std::vector<RocPoint> curve{{0.3, 0.8, 0.2}, {0.6, 0.5, 0.1}};
  CHECK(interpolate_pd(curve, 0.0) == 0.0);
  CHECK(interpolate_pd(curve, 1.0) == 1.0);
  CHECK(interpolate_pd(curve, 0.1) == doctest::Approx(0.5));
  CHECK(interpolate_pd(curve, 0.05) == doctest::Approx(0.25));
  CHECK(interpolate_pd(curve, 0.15) == doctest::Approx(0.65));
  CHECK(interpolate_pd(curve, 0.6) == doctest::Approx(0.9));
}

TEST_CASE("parameter and FLOP accounting") {
  Rng rng(1);
  const Model m = init_model(Architecture{}, rng);
  const CostReport c = count_cost(m);
  CHECK(c.param_total == 1316384);
  CHECK(m.layer_parameter_count(1) == 228);
  CHECK(m.layer_parameter_count(2) == 148);
  CHECK(m.layer_parameter_count(3) == 1310848);
  CHECK(m.layer_parameter_count(4) == 5160);
  CHECK(c.param_nonzero == c.param_total);
  CHECK(c.flops == 2 * (2560 * (228 + 148) + 1310848 + 5160) + 4 * 16 * 40 * 64 * 64);

  const Model p = prune(m, PruneSpec{});
  const CostReport cp = count_cost(p);
  CHECK(cp.param_total == 1316384);
  CHECK(cp.param_nonzero >= 134000);
  CHECK(cp.param_nonzero <= 138000);
  std::size_t masked = 0;
  for (const Param q : kAllParams) masked += static_cast<std::size_t>((p[q].mask.array() == 0.0).count());
  CHECK(cp.param_nonzero + masked == cp.param_total);
  CHECK(cp.flops < c.flops);

  Architecture mlp;
  mlp.variant = Variant::kMlpWssNet;
  const Model mm = make_model(mlp);
  CHECK(count_cost(mm).param_total == 1316384 - 228 - 148 + (72 + 4));
  CHECK(count_cost(mm).flops == 2 * (2560 * 76 + 1310848 + 5160));
}

TEST_CASE("degenerate one-cell architecture") {
  Architecture a;
  a.L = 1;
  a.N = 1;
  const CostReport c = count_cost(make_model(a));
  // CA 3·(3·3·2·4 + 4), conv 3·3·4·4 + 4, FC 4·128 + 128, output 128 + 1.
  CHECK(c.param_total == 228 + 148 + 640 + 129);
  CHECK(c.flops == 2 * (228 + 148 + 640 + 129) + 4 * 16);
}

}  // TEST_SUITE
