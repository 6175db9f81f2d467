#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "support/oracles.hpp"
#include "uhf/nn/checkpoint.hpp"
#include "uhf/nn/layers.hpp"
#include "uhf/nn/ops.hpp"
#include "uhf/nn/parameters.hpp"

using namespace uhf;
using namespace uhf::nn;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double bound = 1.0) {
  return uniform_tensor(std::move(shape), bound, rng);
}

}  // namespace

TEST_CASE("causal_conv1d") {
  SUBCASE("1x1 identity kernel reproduces the input") {
    std::mt19937_64 rng(1);
    const Tensor x = random_tensor({3, 7}, rng);
    Tensor w({3, 3, 1});
    for (std::size_t c = 0; c < 3; ++c) w[c * 3 + c] = 1.0;
    Tape tape;
    const Var y = causal_conv1d(tape, tape.constant(x), tape.constant(w), tape.constant(Tensor({3})), 1);
    CHECK(tape.shape(y) == Shape{3, 7});
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(tape.value(y)[i] == x[i]);
  }
  SUBCASE("k=2, d=2, kernel [1,1] on [1,2,3,4]") {
    Tape tape;
    const Var y = causal_conv1d(tape, tape.constant(Tensor({1, 4}, {1, 2, 3, 4})),
                                tape.constant(Tensor({1, 1, 2}, {1, 1})), tape.constant(Tensor({1})), 2);
    const std::vector<double> got(tape.value(y).values().begin(), tape.value(y).values().end());
    CHECK(got == std::vector<double>{1, 2, 4, 6});
  }
  SUBCASE("matches explicit zero-padded convolution, including d=1") {
    std::mt19937_64 rng(2);
    for (std::size_t d : {1, 2, 3, 5}) {
      const Tensor x = random_tensor({4, 11}, rng);
      const Tensor w = random_tensor({2, 4, 3}, rng);
      const Tensor b = random_tensor({2}, rng);
      Tape tape;
      const Var y = causal_conv1d(tape, tape.constant(x), tape.constant(w), tape.constant(b), d);
      const auto want = testing::brute_causal_conv({x.values().begin(), x.values().end()}, 4, 11,
                                                   {w.values().begin(), w.values().end()}, 2, 3,
                                                   {b.values().begin(), b.values().end()}, d);
      for (std::size_t i = 0; i < want.size(); ++i) CHECK(tape.value(y)[i] == doctest::Approx(want[i]).epsilon(1e-14));
    }
  }
  SUBCASE("errors") {
    Tape tape;
    const Var x = tape.constant(Tensor({2, 5}));
    CHECK_THROWS_AS(causal_conv1d(tape, x, tape.constant(Tensor({1, 3, 2})), tape.constant(Tensor({1})), 1), ShapeError);
    CHECK_THROWS_AS(causal_conv1d(tape, x, tape.constant(Tensor({1, 2, 2})), tape.constant(Tensor({1})), 0),
                    std::invalid_argument);
  }
}

TEST_CASE("residual_block") {
  std::mt19937_64 rng(4);
  SUBCASE("zero residual branch gives relu(input)") {
    const Tensor x = random_tensor({1, 3, 9}, rng);
    Tape tape;
    const Tensor zw({3, 3, 3}), zb({3});
    ResidualBlockVars block{{tape.constant(zw), tape.constant(zb)}, {tape.constant(zw), tape.constant(zb)}, std::nullopt};
    const Var y = residual_block(tape, tape.constant(x), block, 1, 0.0, nullptr);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(tape.value(y)[i] == std::max(0.0, x[i]));
  }
  SUBCASE("channel change uses the 1x1 skip") {
    Tape tape;
    const Var x = tape.constant(random_tensor({1, 2, 6}, rng));
    ResidualBlockVars block{{tape.constant(random_tensor({4, 2, 2}, rng)), tape.constant(Tensor({4}))},
                            {tape.constant(random_tensor({4, 4, 2}, rng)), tape.constant(Tensor({4}))},
                            std::nullopt};
    CHECK_THROWS_AS(residual_block(tape, x, block, 1, 0.0, nullptr), ShapeError);
    block.skip = ConvVars{tape.constant(random_tensor({4, 2, 1}, rng)), tape.constant(Tensor({4}))};
    CHECK(tape.shape(residual_block(tape, x, block, 1, 0.0, nullptr)) == Shape{1, 4, 6});
  }
  SUBCASE("one block k=3 d=1 sees exactly [t-4, t]") {
    CHECK(testing::measured_receptive_field(3, 1, 5) == 5);
  }
}

TEST_CASE("attention_pool") {
  std::mt19937_64 rng(6);
  const Tensor w = random_tensor({4, 3}, rng);
  const Tensor v = random_tensor({4}, rng);
  SUBCASE("single column") {
    const Tensor h = random_tensor({3, 1}, rng);
    Tape tape;
    const auto r = attention_pool(tape, tape.constant(h), tape.constant(w), tape.constant(v));
    CHECK(tape.value(r.weights)[0] == 1.0);
    for (std::size_t c = 0; c < 3; ++c) CHECK(tape.value(r.context)[c] == doctest::Approx(h[c]).epsilon(1e-15));
  }
  SUBCASE("identical columns give uniform weights") {
    Tensor h({3, 5});
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t t = 0; t < 5; ++t) h[c * 5 + t] = 0.3 * static_cast<double>(c) - 0.2;
    }
    Tape tape;
    const auto r = attention_pool(tape, tape.constant(h), tape.constant(w), tape.constant(v));
    for (std::size_t t = 0; t < 5; ++t) CHECK(tape.value(r.weights)[t] == doctest::Approx(0.2).epsilon(1e-14));
  }
  SUBCASE("zero score vector pools to the column mean") {
    const Tensor h = random_tensor({3, 6}, rng);
    Tape tape;
    const auto r = attention_pool(tape, tape.constant(h), tape.constant(w), tape.constant(Tensor({4})));
    for (std::size_t c = 0; c < 3; ++c) {
      double mean = 0.0;
      for (std::size_t t = 0; t < 6; ++t) mean += h[c * 6 + t] / 6.0;
      CHECK(tape.value(r.context)[c] == doctest::Approx(mean).epsilon(1e-13));
    }
  }
  SUBCASE("weights are a distribution") {
    const Tensor h = random_tensor({5, 3, 17}, rng, 3.0);
    Tensor w5 = random_tensor({4, 3}, rng, 3.0);
    Tape tape;
    const auto r = attention_pool(tape, tape.constant(h), tape.constant(w5), tape.constant(v));
    const Tensor& a = tape.value(r.weights);
    for (std::size_t n = 0; n < 5; ++n) {
      double s = 0.0;
      for (std::size_t t = 0; t < 17; ++t) {
        CHECK(a[n * 17 + t] >= 0.0);
        s += a[n * 17 + t];
      }
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("lstm") {
  std::mt19937_64 rng(8);
  const std::size_t c = 3, h = 2;
  SUBCASE("all-zero parameters give zero output") {
    Tape tape;
    const Var y = lstm(tape, tape.constant(random_tensor({c, 6}, rng)), tape.constant(Tensor({4 * h, c})),
                       tape.constant(Tensor({4 * h, h})), tape.constant(Tensor({4 * h})));
    for (double v : tape.value(y).values()) CHECK(v == 0.0);
  }
  SUBCASE("single step matches the gate equations") {
    const Tensor x = random_tensor({c, 1}, rng);
    const Tensor wx = random_tensor({4 * h, c}, rng);
    const Tensor wh = random_tensor({4 * h, h}, rng);
    const Tensor b = random_tensor({4 * h}, rng);
    Tape tape;
    const Var y = lstm(tape, tape.constant(x), tape.constant(wx), tape.constant(wh), tape.constant(b));
    auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
    for (std::size_t j = 0; j < h; ++j) {
      auto pre = [&](std::size_t gate) {
        double s = b[gate * h + j];
        for (std::size_t k = 0; k < c; ++k) s += wx[(gate * h + j) * c + k] * x[k];
        return s;
      };
      const double in = sig(pre(0)), cell = std::tanh(pre(2)), out = sig(pre(3));
      CHECK(tape.value(y)[j] == doctest::Approx(out * std::tanh(in * cell)).epsilon(1e-14));
    }
  }
  SUBCASE("causality") {
    const Tensor wx = random_tensor({4 * h, c}, rng), wh = random_tensor({4 * h, h}, rng), b = random_tensor({4 * h}, rng);
    Tensor x = random_tensor({2, c, 9}, rng);
    auto run = [&](const Tensor& in) {
      Tape tape;
      return Tensor(tape.value(lstm(tape, tape.constant(in), tape.constant(wx), tape.constant(wh), tape.constant(b))));
    };
    const Tensor base = run(x);
    x[1 * 9 + 5] += 1.0;  // batch 0, channel 1, t = 5
    const Tensor moved = run(x);
    for (std::size_t n = 0; n < 2; ++n) {
      for (std::size_t j = 0; j < h; ++j) {
        for (std::size_t t = 0; t < 5; ++t) CHECK(moved[(n * h + j) * 9 + t] == base[(n * h + j) * 9 + t]);
      }
    }
    CHECK(moved[5] != base[5]);
  }
}

TEST_CASE("softmax") {
  const Tensor uniform = softmax(Tensor({5}, {0.3, 0.3, 0.3, 0.3, 0.3}));
  for (double p : uniform.values()) CHECK(p == doctest::Approx(0.2).epsilon(1e-15));
  const Tensor p = softmax(Tensor({5}, {0, 0, std::log(6.0), 0, 0}));
  const std::vector<double> want{0.1, 0.1, 0.6, 0.1, 0.1};
  for (std::size_t k = 0; k < 5; ++k) CHECK(p[k] == doctest::Approx(want[k]).epsilon(1e-14));
  const Tensor shifted = softmax(Tensor({5}, {100, 100, 100 + std::log(6.0), 100, 100}));
  for (std::size_t k = 0; k < 5; ++k) CHECK(shifted[k] == doctest::Approx(p[k]).epsilon(1e-14));
  CHECK_THROWS_AS(softmax(Tensor({2}, {0.0, std::nan("")})), std::domain_error);

  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor q = softmax(random_tensor({7}, rng, 50.0));
    double s = 0.0;
    for (double v : q.values()) {
      CHECK(v > 0.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("cross_entropy") {
  const std::vector<double> e2{0, 0, 1, 0, 0};
  const std::vector<std::vector<double>> uniform{{0.2, 0.2, 0.2, 0.2, 0.2}};
  const std::vector<std::vector<double>> y1{e2};
  CHECK(std::abs(cross_entropy(uniform, y1) - std::log(5.0)) < 1e-12);
  const std::vector<std::vector<double>> sharp{{0.1, 0.1, 0.6, 0.1, 0.1}};
  CHECK(cross_entropy(sharp, y1) == doctest::Approx(0.5108256).epsilon(1e-7));
  const std::vector<std::vector<double>> both{sharp[0], uniform[0]};
  const std::vector<std::vector<double>> y2{e2, e2};
  CHECK(cross_entropy(both, y2) == doctest::Approx((0.5108256237659907 + 1.6094379124341003) / 2).epsilon(1e-12));
  const std::vector<std::vector<double>> zero{{1, 0, 0, 0, 0}};
  CHECK(cross_entropy(zero, y1) == doctest::Approx(-std::log(kProbabilityFloor)));
}

TEST_CASE("backward") {
  SUBCASE("sum of a parameter has an all-ones gradient") {
    Tensor p({2, 3}, {1, 2, 3, 4, 5, 6});
    Tape tape;
    tape.backward(sum(tape, tape.parameter(p)));
    for (double g : p.grad()) CHECK(g == 1.0);
  }
  SUBCASE("gradients accumulate across tapes") {
    Tensor p({3}, {1, 2, 3});
    for (int i = 0; i < 2; ++i) {
      Tape tape;
      tape.backward(sum(tape, tape.parameter(p)));
    }
    for (double g : p.grad()) CHECK(g == 2.0);
  }
  SUBCASE("a replayed tape refuses a second sweep") {
    Tensor p({3}, {1, 2, 3});
    Tape tape;
    const Var loss = sum(tape, tape.parameter(p));
    tape.backward(loss);
    CHECK_THROWS_AS(tape.backward(loss), std::logic_error);
  }
  SUBCASE("softmax cross-entropy gradient is pi - y") {
    std::mt19937_64 rng(12);
    ParameterSet params;
    params.add("z", random_tensor({3, 5}, rng, 2.0));
    const std::vector<int> targets{0, 2, 4};
    Tape tape;
    tape.backward(softmax_cross_entropy(tape, tape.parameter(params.at("z")), targets));
    const Tensor pi = softmax(params.at("z"));
    for (std::size_t n = 0; n < 3; ++n) {
      for (std::size_t k = 0; k < 5; ++k) {
        const double y = static_cast<int>(k) == targets[n] ? 1.0 : 0.0;
        CHECK(params.at("z").grad()[n * 5 + k] == doctest::Approx((pi[n * 5 + k] - y) / 3.0).epsilon(1e-12));
      }
    }
    const auto fd = testing::gradcheck(params, [&](Tape& t, const uhf::ParamBinder& bind) {
      return softmax_cross_entropy(t, bind("z"), targets);
    });
    CHECK(fd.max_rel_error < 1e-6);
  }
  SUBCASE("every primitive agrees with finite differences") {
    std::mt19937_64 rng(14);
    ParameterSet params;
    params.add("x", random_tensor({2, 3, 8}, rng));
    params.add("conv.w", random_tensor({3, 3, 2}, rng));
    params.add("conv.b", random_tensor({3}, rng));
    params.add("att.w", random_tensor({4, 3}, rng));
    params.add("att.v", random_tensor({4}, rng));
    params.add("lstm.wx", random_tensor({8, 3}, rng));
    params.add("lstm.wh", random_tensor({8, 2}, rng));
    params.add("lstm.b", random_tensor({8}, rng));
    params.add("lin.w", random_tensor({5, 5}, rng));
    params.add("lin.b", random_tensor({5}, rng));
    const std::vector<int> targets{1, 3};
    const auto fd = testing::gradcheck(params, [&](Tape& t, const uhf::ParamBinder& bind) {
      Var h = causal_conv1d(t, bind("x"), bind("conv.w"), bind("conv.b"), 2);
      h = add(t, relu(t, h), bind("x"));
      const auto att = attention_pool(t, h, bind("att.w"), bind("att.v"));
      const Var seq = lstm(t, h, bind("lstm.wx"), bind("lstm.wh"), bind("lstm.b"));
      // [B, 3] ++ [B, 2] assembled through two linear maps into the logits.
      Tensor sel_a({5, 3}), sel_b({5, 2});
      for (std::size_t i = 0; i < 3; ++i) sel_a[i * 3 + i] = 1.0;
      for (std::size_t i = 0; i < 2; ++i) sel_b[(3 + i) * 2 + i] = 1.0;
      const Var feats = add(t, linear(t, att.context, t.constant(sel_a), t.constant(Tensor({5}))),
                            linear(t, last_step(t, seq), t.constant(sel_b), t.constant(Tensor({5}))));
      return softmax_cross_entropy(t, linear(t, feats, bind("lin.w"), bind("lin.b")), targets);
    });
    INFO(fd.worst);
    CHECK(fd.max_rel_error < 1e-5);
  }
}

TEST_CASE("dropout") {
  std::mt19937_64 rng(16);
  const Tensor x = random_tensor({4, 50}, rng);
  Tape tape;
  const Var in = tape.constant(x);
  CHECK(dropout(tape, in, 0.5, nullptr).id == in.id);
  std::mt19937_64 a(1), b(1);
  const Tensor ya = tape.value(dropout(tape, in, 0.3, &a));
  const Tensor yb = tape.value(dropout(tape, in, 0.3, &b));
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(ya[i] == yb[i]);
    if (ya[i] == 0.0) ++zeros;
    else CHECK(ya[i] == doctest::Approx(x[i] / 0.7).epsilon(1e-15));
  }
  CHECK(zeros > 20);
  CHECK(zeros < 100);
}

TEST_CASE("adam_step") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    ParameterSet p;
    p.add("w", Tensor({3}, {1, -2, 3}));
    p.at("w").grad();
    adam_step(p, {});
    CHECK(p.at("w")[0] == 1.0);
    CHECK(p.at("w")[1] == -2.0);
  }
  SUBCASE("first step moves by the learning rate") {
    for (double g : {0.5, -3.0, 1e-3}) {
      ParameterSet p;
      p.add("w", Tensor({1}, {2.0}));
      p.at("w").grad()[0] = g;
      adam_step(p, {0.01});
      // m_hat = g, v_hat = g^2, so the step is lr * |g| / (|g| + eps).
      const double expected = 0.01 * std::abs(g) / (std::abs(g) + 1e-8);
      CHECK(std::abs(p.at("w")[0] - 2.0) == doctest::Approx(expected).epsilon(1e-10));
      CHECK(!p.at("w").has_grad());
    }
  }
  SUBCASE("identical inputs give identical updates") {
    ParameterSet a, b;
    a.add("w", Tensor({2}, {0.1, 0.2}));
    b.add("w", Tensor({2}, {0.1, 0.2}));
    for (int s = 0; s < 3; ++s) {
      a.at("w").grad()[0] = b.at("w").grad()[0] = 0.7 * s;
      a.at("w").grad()[1] = b.at("w").grad()[1] = -0.3;
      adam_step(a, {});
      adam_step(b, {});
    }
    CHECK(a.at("w")[0] == b.at("w")[0]);
    CHECK(a.at("w")[1] == b.at("w")[1]);
  }
  SUBCASE("missing gradient") {
    ParameterSet p;
    p.add("w", Tensor({1}));
    CHECK_THROWS_AS(adam_step(p, {}), std::logic_error);
  }
  SUBCASE("duplicate paths rejected") {
    ParameterSet p;
    p.add("w", Tensor({1}));
    CHECK_THROWS_AS(p.add("w", Tensor({1})), std::invalid_argument);
  }
}

TEST_CASE("checkpoint round trip preserves every bit") {
  std::mt19937_64 rng(18);
  ParameterSet p;
  p.add("a.weight", random_tensor({3, 2, 4}, rng));
  p.add("b", Tensor({2}, {-0.0, std::numeric_limits<double>::denorm_min()}));
  std::stringstream buf;
  write_checkpoint(buf, p);
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 7) == "UHFCKPT");
  const ParameterSet q = read_checkpoint(buf);
  REQUIRE(q.size() == 2);
  for (const auto& [name, param] : p) {
    const Tensor& other = q.at(name);
    CHECK(other.shape() == param.value.shape());
    CHECK(std::memcmp(other.data(), param.value.data(), param.value.size() * sizeof(double)) == 0);
  }
  std::stringstream bad("NOTACKPT");
  CHECK_THROWS_AS(read_checkpoint(bad), CheckpointError);
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_checkpoint(truncated), CheckpointError);
}
