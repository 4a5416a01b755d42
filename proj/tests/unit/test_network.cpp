#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "wss/network.hpp"
#include "wss/rng.hpp"

using namespace wss;
using wss::testing::conv_reference;

TEST_SUITE("neuralnet") {

TEST_CASE("conv identity kernel reproduces the input") {
  ChannelStack x = ChannelStack::Random(5, 7);
  std::vector<double> k(9, 0.0), b{0.0};
  k[4] = 1.0;
  const ChannelStack y = conv2d_zp(x, 1, k, b, 1);
  CHECK((y - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("conv on a 1x1 input sees only the center tap") {
  ChannelStack x = ChannelStack::Ones(1, 1);
  std::vector<double> k(9, 1.0), b{0.0};
  const ChannelStack y = conv2d_zp(x, 1, k, b, 1);
  REQUIRE(y.rows() == 1);
  REQUIRE(y.cols() == 1);
  CHECK(y(0, 0) == 1.0);
}

TEST_CASE("conv matches the six-loop reference") {
  Rng rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const auto [cin, cout, H, W] : std::vector<std::array<std::size_t, 4>>{{2, 4, 5, 5}, {4, 4, 6, 3}, {3, 2, 1, 4}}) {
    ChannelStack x(static_cast<Eigen::Index>(H), static_cast<Eigen::Index>(W * cin));
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
    std::vector<double> k(9 * cin * cout), b(cout);
    for (auto& v : k) v = u(rng);
    for (auto& v : b) v = u(rng);
    const ChannelStack got = conv2d_zp(x, cin, k, b, cout);
    const ChannelStack want = conv_reference(x, cin, k, b, cout);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("conv backward input gradient is the adjoint of the forward map") {
  Rng rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const std::size_t cin = 3, cout = 2;
  ChannelStack x(4, 5 * cin), g(4, 5 * cout);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = u(rng);
  std::vector<double> k(9 * cin * cout), zero_b(cout, 0.0), dk(k.size(), 0.0), db(cout, 0.0);
  for (auto& v : k) v = u(rng);
  ChannelStack dx = ChannelStack::Zero(x.rows(), x.cols());
  conv2d_zp_backward(x, cin, k, cout, g, dk, db, &dx);
  // <conv(x), g> = <x, convᵀ(g)> for the bias-free map.
  const double lhs = (conv2d_zp(x, cin, k, zero_b, cout).array() * g.array()).sum();
  const double rhs = (x.array() * dx.array()).sum();
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  CHECK(db[0] == doctest::Approx(g.leftCols(5).sum()));
}

TEST_CASE("attention map rows are probability vectors") {
  const Model m = wss::testing::random_model(wss::testing::tiny_architecture(Variant::kCaWssNet), 3);
  const auto batch = wss::testing::random_batch(m.arch, 1, 3);
  const AttentionState st = ca_module(batch.inputs[0], m);
  const Eigen::MatrixXd M = st.attention_map();
  CHECK(M.rows() == 16);
  CHECK(M.minCoeff() >= 0.0);
  CHECK((M.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-9);
}

TEST_CASE("zero input and zero biases give a uniform map and zero output") {
  Architecture a;
  Rng rng(1);
  Model m = init_model(a, rng);
  const ChannelStack x = ChannelStack::Zero(40, 128);
  const AttentionState st = ca_module(x, m);
  CHECK(st.map_t.rows() == 256);
  CHECK((st.map_t.array() - 1.0 / 256.0).abs().maxCoeff() < 1e-15);
  CHECK(st.output.cwiseAbs().maxCoeff() == 0.0);
  CHECK(st.output.rows() == 40);
  CHECK(st.output.cols() == 256);
}

TEST_CASE("attention output equals V times the transposed map") {
  const Model m = wss::testing::random_model(wss::testing::tiny_architecture(Variant::kCaWssNet), 8);
  const auto batch = wss::testing::random_batch(m.arch, 1, 8);
  const AttentionState st = ca_module(batch.inputs[0], m);
  Eigen::MatrixXd logits = st.query.transpose() * st.key / std::sqrt(4.0);
  Eigen::MatrixXd M(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const Eigen::RowVectorXd e = (logits.row(i).array() - logits.row(i).maxCoeff()).exp();
    M.row(i) = e / e.sum();
  }
  const Eigen::MatrixXd F = M * st.value.transpose();
  CHECK((F.transpose() - st.output).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("forward output has L entries strictly inside (0, 1)") {
  Architecture a;
  Rng rng(2);
  const Model m = init_model(a, rng);
  FeatureTensor x(40, 64);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : x.data()) v = u(rng);
  const Eigen::VectorXd p = forward(m, x);
  REQUIRE(p.size() == 40);
  CHECK(p.minCoeff() > 0.0);
  CHECK(p.maxCoeff() < 1.0);
  CHECK((forward(m, x) - p).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("all-zero weights give 0.5 everywhere") {
  const Model m = make_model(Architecture{});
  FeatureTensor x(40, 64);
  x.at(3, 5, 1) = 0.7;
  const Eigen::VectorXd p = forward(m, x);
  CHECK((p.array() - 0.5).abs().maxCoeff() == 0.0);
}

TEST_CASE("forward rejects a mismatched input shape") {
  const Model m = make_model(Architecture{});
  CHECK_THROWS_AS(forward(m, FeatureTensor(40, 32)), std::invalid_argument);
}

TEST_CASE("bce values") {
  Eigen::MatrixXd half = Eigen::MatrixXd::Constant(1, 40, 0.5);
  Eigen::MatrixXd labels = Eigen::MatrixXd::Zero(1, 40);
  labels(0, 3) = 1.0;
  CHECK(bce_loss(half, labels) == doctest::Approx(40.0 * std::log(2.0)).epsilon(1e-12));
  CHECK(bce_loss(half, labels) == doctest::Approx(27.7259).epsilon(1e-5));
  Eigen::MatrixXd one = Eigen::MatrixXd::Constant(1, 1, std::exp(-1.0));
  CHECK(bce_loss(one, Eigen::MatrixXd::Ones(1, 1)) == doctest::Approx(1.0).epsilon(1e-12));
  const Eigen::MatrixXd exact = labels;
  CHECK(bce_loss(exact, labels) <= 40.0 * -std::log(1.0 - kBceClip) + 1e-12);
  CHECK(std::isfinite(bce_loss(exact, 1.0 - labels.array())));
}

TEST_CASE("analytic gradients match central differences") {
  for (const Variant v : {Variant::kCaWssNet, Variant::kMlpWssNet}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const Model m = wss::testing::random_model(wss::testing::tiny_architecture(v), seed);
      const auto batch = wss::testing::random_batch(m.arch, 3, seed);
      for (const auto& c : wss::testing::gradient_check(m, batch)) {
        CAPTURE(param_name(c.param));
        CAPTURE(seed);
        CHECK(c.analytic_norm > 0.0);
        CHECK(c.relative_error < 1e-5);
      }
    }
  }
}

TEST_CASE("masked weights receive exactly zero gradient") {
  Model m = wss::testing::random_model(wss::testing::tiny_architecture(Variant::kCaWssNet), 4);
  for (const Param p : kAllParams) {
    m[p].mask[0] = 0.0;
    m[p].apply_mask();
  }
  const auto batch = wss::testing::random_batch(m.arch, 2, 4);
  Gradients g;
  loss_and_gradients(m, batch.inputs, batch.labels, g);
  for (const Param p : kAllParams) CHECK(g[static_cast<std::size_t>(p)][0] == 0.0);
}

TEST_CASE("layer selection leaves other layers without gradient") {
  const Model m = wss::testing::random_model(wss::testing::tiny_architecture(Variant::kCaWssNet), 6);
  const auto batch = wss::testing::random_batch(m.arch, 2, 6);
  Gradients all, some;
  const double l1 = loss_and_gradients(m, batch.inputs, batch.labels, all);
  const double l2 = loss_and_gradients(m, batch.inputs, batch.labels, some, LayerSet::only({3, 4}));
  CHECK(l1 == l2);
  for (const Param p : kAllParams) {
    const auto i = static_cast<std::size_t>(p);
    if (layer_of(p) >= 3) {
      CHECK((all[i] - some[i]).cwiseAbs().maxCoeff() == 0.0);
    } else {
      CHECK(some[i].cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("flatten order is (l, n, c) and unflatten inverts it") {
  ChannelStack maps = ChannelStack::Random(3, 4 * 2);
  Eigen::RowVectorXd flat(24);
  flatten_maps(maps, 4, flat);
  CHECK(flat((1 * 2 + 1) * 4 + 2) == maps(1, 2 * 2 + 1));
  ChannelStack back(3, 8);
  unflatten_maps(flat, 4, back);
  CHECK((back - maps).cwiseAbs().maxCoeff() == 0.0);
}

}  // TEST_SUITE
