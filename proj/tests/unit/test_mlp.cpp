#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "hed/binary_io.hpp"
#include "hed/mlp.hpp"

using namespace hed;

namespace {

// Gradients below the floor are compared in absolute terms; FD roundoff there is ~eps |f| / step.
double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> d(0.0, sd);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

// Plain dense forward pass written against the documented parameter layout.
std::vector<double> oracle_forward(const Mlp& net, std::vector<double> x) {
  const auto& spec = net.spec();
  const auto p = net.params();
  std::size_t off = 0;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const std::size_t in = spec.fan_in(l), out = spec.fan_out(l);
    std::vector<double> y(out);
    for (std::size_t o = 0; o < out; ++o) {
      long double s = p[off + out * in + o];
      for (std::size_t i = 0; i < in; ++i) s += static_cast<long double>(p[off + o * in + i]) * x[i];
      y[o] = static_cast<double>(s);
    }
    off += out * in + out;
    const Activation act = l + 1 == spec.layer_count() ? spec.output_activation : spec.hidden_activation;
    for (double& v : y) {
      if (act == Activation::relu) v = v > 0 ? v : 0;
      if (act == Activation::tanh) v = std::tanh(v);
    }
    x = y;
  }
  return x;
}

}  // namespace

TEST_CASE("parameter count and layout") {
  // (3*64 + 64) + (64*64 + 64) + (64*1 + 1)
  const MlpSpec spec{3, {64, 64}, 1};
  CHECK(spec.param_count() == 256 + 4160 + 65);
  CHECK(Mlp::init(spec, 0).param_count() == 4481);
  const MlpSpec small{2, {3}, 1};
  Mlp net(small);
  CHECK(net.weights(0).size() == 6);
  CHECK(net.bias(0).size() == 3);
  CHECK(net.weights(1).size() == 3);
  CHECK(net.bias(1).size() == 1);
  CHECK(net.bias(0).data() == net.weights(0).data() + 6);
  CHECK(net.weights(1).data() == net.bias(0).data() + 3);
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS((MlpSpec{0, {4}, 1}).validate(), std::invalid_argument);
  CHECK_THROWS_AS((MlpSpec{1, {}, 1}).validate(), std::invalid_argument);
  CHECK_THROWS_AS((MlpSpec{1, {0}, 1}).validate(), std::invalid_argument);
  CHECK_THROWS_AS((MlpSpec{1, {2}, 1, Activation::identity}).validate(), std::invalid_argument);
  CHECK_THROWS_AS((MlpSpec{1, {2}, 1, Activation::relu, Activation::relu}).validate(), std::invalid_argument);
  CHECK_THROWS_AS(activation_from_string("sigmoid"), std::invalid_argument);
  CHECK(activation_from_string(to_string(Activation::tanh)) == Activation::tanh);
}

TEST_CASE("initialization law and determinism") {
  const MlpSpec one{1, {1}, 1};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Mlp net = Mlp::init(one, seed);
    for (std::size_t l = 0; l < one.layer_count(); ++l) {
      for (double w : net.weights(l)) CHECK(std::abs(w) <= 1.0);
      for (double b : net.bias(l)) CHECK(b == 0.0);
    }
  }
  const MlpSpec spec{3, {64, 64}, 1};
  const Mlp a = Mlp::init(spec, 42), b = Mlp::init(spec, 42), c = Mlp::init(spec, 43);
  CHECK(a.flatten() == b.flatten());
  CHECK(a.flatten() != c.flatten());
  for (double w : a.weights(1)) CHECK(std::abs(w) <= 1.0 / 8.0);
}

TEST_CASE("forward: zero and bias-only nets") {
  const MlpSpec spec{3, {4, 4}, 2};
  Mlp net(spec);
  const std::vector<double> x{0.3, -1.0, 2.0};
  CHECK(net.forward(x) == std::vector<double>{0.0, 0.0});
  net.bias(2)[0] = 1.5;
  net.bias(2)[1] = -0.25;
  CHECK(net.forward(x) == std::vector<double>{1.5, -0.25});
}

TEST_CASE("forward matches a dense oracle and is pure") {
  std::mt19937_64 rng(7);
  for (Activation act : {Activation::relu, Activation::tanh}) {
    const MlpSpec spec{5, {16, 9}, 3, act, Activation::tanh};
    const Mlp net = Mlp::init(spec, 11);
    for (int trial = 0; trial < 10; ++trial) {
      const auto x = random_vec(5, rng);
      const auto y = net.forward(x);
      const auto o = oracle_forward(net, x);
      for (std::size_t k = 0; k < y.size(); ++k) CHECK(std::abs(y[k] - o[k]) < 1e-12);
      CHECK(net.forward(x) == y);
    }
    // batched path agrees with per-sample calls
    Matrix xb(5, 4);
    for (double& v : xb.data) v = random_vec(1, rng)[0];
    const Matrix yb = net.forward(xb);
    for (std::size_t b = 0; b < 4; ++b) CHECK(net.forward(xb.column(b)) == yb.column(b));
  }
}

TEST_CASE("flatten / unflatten round trip") {
  std::mt19937_64 rng(3);
  Mlp net(MlpSpec{2, {5, 3}, 2});
  const auto v = random_vec(net.param_count(), rng);
  net.unflatten(v);
  CHECK(net.flatten() == v);
  CHECK_THROWS_AS(net.unflatten(std::vector<double>(3)), std::invalid_argument);
}

TEST_CASE("backward: zero upstream gives zero gradients") {
  const Mlp net = Mlp::init(MlpSpec{3, {8}, 2}, 1);
  const auto g = net.backward(std::vector<double>{1, 2, 3}, std::vector<double>{0, 0});
  CHECK(std::all_of(g.params.begin(), g.params.end(), [](double v) { return v == 0.0; }));
  CHECK(std::all_of(g.input.begin(), g.input.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("backward: linear regime input gradient is W1^T W2^T u") {
  // Positive weights and inputs keep every ReLU active, so the net is linear.
  Mlp net(MlpSpec{2, {3}, 2});
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(0.1, 1.0);
  for (double& p : net.params()) p = pos(rng);
  const std::vector<double> x{0.5, 1.5}, u{2.0, -1.0};
  const auto g = net.backward(x, u);
  const auto w1 = net.weights(0), w2 = net.weights(1);
  for (std::size_t i = 0; i < 2; ++i) {
    double expect = 0.0;
    for (std::size_t h = 0; h < 3; ++h) {
      double w2t_u = 0.0;
      for (std::size_t o = 0; o < 2; ++o) w2t_u += w2[o * 3 + h] * u[o];
      expect += w1[h * 2 + i] * w2t_u;
    }
    CHECK(g.input[i] == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("backward matches central finite differences on 100 random cases") {
  std::mt19937_64 rng(99);
  const double step = 1e-6;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t in = 1 + trial % 4, out = 1 + trial % 3;
    const MlpSpec spec{in, {6, 5}, out, Activation::tanh, trial % 2 ? Activation::tanh : Activation::identity};
    Mlp net = Mlp::init(spec, static_cast<std::uint64_t>(trial));
    const auto x = random_vec(in, rng);
    const auto u = random_vec(out, rng);
    const auto g = net.backward(x, u);
    auto f = [&](const Mlp& n, std::span<const double> xx) { return dot(n.forward(xx), u); };
    auto p = net.params();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double orig = p[k];
      p[k] = orig + step;
      const double up = f(net, x);
      p[k] = orig - step;
      const double down = f(net, x);
      p[k] = orig;
      const double fd = (up - down) / (2 * step);
      worst = std::max(worst, rel_err(g.params[k], fd));
    }
    for (std::size_t i = 0; i < in; ++i) {
      auto xp = x, xm = x;
      xp[i] += step;
      xm[i] -= step;
      worst = std::max(worst, rel_err(g.input[i], (f(net, xp) - f(net, xm)) / (2 * step)));
    }
  }
  MESSAGE("worst relative error " << worst);
  CHECK(worst < 1e-5);
}

TEST_CASE("batched backward sums per-sample gradients") {
  std::mt19937_64 rng(12);
  const Mlp net = Mlp::init(MlpSpec{3, {7}, 2, Activation::tanh}, 4);
  Matrix x(3, 5), d(2, 5);
  for (double& v : x.data) v = random_vec(1, rng)[0];
  for (double& v : d.data) v = random_vec(1, rng)[0];
  ForwardCache cache;
  net.forward(x, &cache);
  std::vector<double> grad(net.param_count(), 0.0);
  Matrix dx;
  net.backward(cache, d, grad, &dx);
  std::vector<double> sum(net.param_count(), 0.0);
  for (std::size_t b = 0; b < 5; ++b) {
    const auto g = net.backward(x.column(b), d.column(b));
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += g.params[k];
    for (std::size_t i = 0; i < 3; ++i) CHECK(dx(i, b) == doctest::Approx(g.input[i]).epsilon(1e-13));
  }
  for (std::size_t k = 0; k < sum.size(); ++k) CHECK(grad[k] == doctest::Approx(sum[k]).epsilon(1e-12));
}

TEST_CASE("Adam") {
  SUBCASE("zero gradient leaves parameters and counts the step") {
    AdamState s(3, {});
    std::vector<double> p{1, 2, 3};
    s.step(p, std::vector<double>{0, 0, 0}, Direction::descent);
    CHECK(p == std::vector<double>{1, 2, 3});
    CHECK(s.steps() == 1);
  }
  SUBCASE("first step moves each coordinate by about lr") {
    // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
    AdamConfig cfg;
    cfg.lr = 1e-3;
    AdamState s(3, cfg);
    std::vector<double> p{0, 0, 0};
    const std::vector<double> g{0.5, -2.0, 1e-3};
    s.step(p, g, Direction::descent);
    for (std::size_t k = 0; k < 3; ++k) {
      const double expect = -cfg.lr * g[k] / (std::abs(g[k]) + cfg.eps);
      CHECK(p[k] == doctest::Approx(expect).epsilon(1e-12));
      CHECK(std::abs(std::abs(p[k]) - cfg.lr) < 1e-7);
    }
    std::vector<double> q{0, 0, 0};
    AdamState up(3, cfg);
    up.step(q, g, Direction::ascent);
    for (std::size_t k = 0; k < 3; ++k) CHECK(q[k] == -p[k]);
  }
  SUBCASE("displacement scales with lr at t=1") {
    AdamConfig a, b;
    a.lr = 1e-3;
    b.lr = 4e-3;
    AdamState sa(1, a), sb(1, b);
    std::vector<double> pa{0}, pb{0};
    sa.step(pa, std::vector<double>{0.3}, Direction::descent);
    sb.step(pb, std::vector<double>{0.3}, Direction::descent);
    CHECK(pb[0] / pa[0] == doctest::Approx(4.0).epsilon(1e-12));
  }
  SUBCASE("serialization round trip") {
    AdamState s(4, {});
    std::vector<double> p{1, 2, 3, 4};
    s.step(p, std::vector<double>{0.1, -0.2, 0.3, -0.4}, Direction::ascent);
    std::stringstream ss;
    s.write(ss);
    CHECK(AdamState::read(ss) == s);
  }
}

TEST_CASE("Polyak averaging") {
  std::vector<double> t{1.0};
  polyak_update(t, std::vector<double>{0.0}, 0.995);
  CHECK(t[0] == doctest::Approx(0.995).epsilon(1e-15));

  std::vector<double> same{0.3, -0.7};
  polyak_update(same, std::vector<double>{0.3, -0.7}, 0.9);
  CHECK(same[0] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(same[1] == doctest::Approx(-0.7).epsilon(1e-15));

  std::vector<double> x{5.0};
  for (int k = 0; k < 5000; ++k) polyak_update(x, std::vector<double>{2.0}, 0.995);
  CHECK(std::abs(x[0] - 2.0) < 3.0 * std::pow(0.995, 5000) * 1.01);

  CHECK_THROWS_AS(polyak_update(x, std::vector<double>{1.0}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(polyak_update(x, std::vector<double>{1.0}, 0.0), std::invalid_argument);
}

TEST_CASE("fragment round trip and corruption") {
  const Mlp net = Mlp::init(MlpSpec{3, {5, 4}, 2, Activation::tanh, Activation::tanh}, 8);
  std::stringstream ss;
  write_fragment(ss, net);
  const std::string bytes = ss.str();
  std::stringstream in(bytes);
  const Mlp back = read_fragment(in);
  CHECK(back.spec() == net.spec());
  CHECK(back.flatten() == net.flatten());
  std::stringstream again;
  write_fragment(again, back);
  CHECK(again.str() == bytes);

  std::string bad = bytes;
  bad[0] = 'X';
  std::stringstream bad_in(bad);
  CHECK_THROWS_AS(read_fragment(bad_in), CheckpointError);
  std::stringstream truncated(bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(read_fragment(truncated), CheckpointError);
}
