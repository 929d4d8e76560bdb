#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "vg3d/checkpoint.hpp"
#include "vg3d/gradcheck.hpp"
#include "vg3d/params.hpp"
#include "vg3d/tensor.hpp"

using namespace vg3d;

TEST_CASE("masked_softmax basics") {
  auto t = Tensor::from_data({2}, {0.0, 0.0});
  auto y = softmax(t);
  CHECK(y.value_at(0) == doctest::Approx(0.5));
  CHECK(y.value_at(1) == doctest::Approx(0.5));

  auto t2 = Tensor::from_data({3}, {1.0, 1.0, 1.0});
  BoolMask keep{{3}, {1, 1, 0}};
  auto y2 = masked_softmax(t2, &keep);
  CHECK(y2.value_at(0) == doctest::Approx(0.5));
  CHECK(y2.value_at(1) == doctest::Approx(0.5));
  CHECK(y2.value_at(2) == 0.0);  // exactly zero on masked entries

  // softmax([ln 2, 0]) = [2/3, 1/3], by hand evaluation.
  auto t3 = Tensor::from_data({2}, {std::log(2.0), 0.0});
  auto y3 = softmax(t3);
  CHECK(y3.value_at(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(y3.value_at(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("masked_softmax fully-masked row falls back to uniform") {
  auto t = Tensor::from_data({2, 2}, {5.0, -3.0, 1.0, 2.0});
  BoolMask keep{{2, 2}, {0, 0, 1, 1}};
  auto y = masked_softmax(t, &keep);
  CHECK(y.value_at(0) == doctest::Approx(0.5));
  CHECK(y.value_at(1) == doctest::Approx(0.5));
  double s = y.value_at(2) + y.value_at(3);
  CHECK(s == doctest::Approx(1.0));
}

TEST_CASE("masked_softmax rows sum to one and are non-negative") {
  Rng rng(7);
  std::vector<double> data(40);
  std::vector<std::uint8_t> keepv(40);
  for (auto& v : data) v = rng.normal() * 3;
  for (auto& v : keepv) v = rng.uniform() < 0.6 ? 1 : 0;
  auto t = Tensor::from_data({8, 5}, data);
  BoolMask keep{{8, 5}, keepv};
  auto y = masked_softmax(t, &keep);
  for (int r = 0; r < 8; ++r) {
    double s = 0;
    for (int c = 0; c < 5; ++c) {
      double v = y.value_at(r * 5 + c);
      CHECK(v >= 0.0);
      if (!keepv[static_cast<std::size_t>(r * 5 + c)]) {
        bool row_empty = true;
        for (int c2 = 0; c2 < 5; ++c2)
          if (keepv[static_cast<std::size_t>(r * 5 + c2)]) row_empty = false;
        if (!row_empty) CHECK(v == 0.0);
      }
      s += v;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("masked_softmax mask shape mismatch throws") {
  auto t = Tensor::from_data({2}, {0.0, 0.0});
  BoolMask keep{{3}, {1, 1, 1}};
  CHECK_THROWS_AS(masked_softmax(t, &keep), std::runtime_error);
}

TEST_CASE("layer_norm examples") {
  auto g1 = Tensor::from_data({2}, {1.0, 1.0});
  auto b0 = Tensor::from_data({2}, {0.0, 0.0});
  auto x = Tensor::from_data({2}, {1.0, 1.0});
  auto y = layer_norm(x, g1, b0, 1e-5);
  CHECK(y.value_at(0) == doctest::Approx(0.0));
  CHECK(y.value_at(1) == doctest::Approx(0.0));

  auto x2 = Tensor::from_data({2}, {0.0, 2.0});
  auto y2 = layer_norm(x2, g1, b0, 1e-12);
  CHECK(y2.value_at(0) == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(y2.value_at(1) == doctest::Approx(1.0).epsilon(1e-6));

  auto g0 = Tensor::from_data({2}, {0.0, 0.0});
  auto b7 = Tensor::from_data({2}, {7.0, 7.0});
  auto x3 = Tensor::from_data({2}, {3.0, 5.0});
  auto y3 = layer_norm(x3, g0, b7, 1e-5);
  CHECK(y3.value_at(0) == doctest::Approx(7.0));
  CHECK(y3.value_at(1) == doctest::Approx(7.0));
}

TEST_CASE("attention single key returns the value row") {
  auto q = Tensor::from_data({1, 4}, {0.3, -1.0, 2.0, 0.1});
  auto k = Tensor::from_data({1, 4}, {1.0, 1.0, 1.0, 1.0});
  auto v = Tensor::from_data({1, 4}, {5.0, 6.0, 7.0, 8.0});
  auto y = attention(q, k, v, 2);
  for (int i = 0; i < 4; ++i) CHECK(y.value_at(i) == doctest::Approx(5.0 + i).epsilon(1e-12));
}

TEST_CASE("attention with identical keys averages the values") {
  auto q = Tensor::from_data({1, 2}, {0.7, -0.2});
  auto k = Tensor::from_data({2, 2}, {1.0, 2.0, 1.0, 2.0});
  auto v = Tensor::from_data({2, 2}, {0.0, 4.0, 2.0, 6.0});
  auto y = attention(q, k, v, 1);
  CHECK(y.value_at(0) == doctest::Approx(1.0));
  CHECK(y.value_at(1) == doctest::Approx(5.0));
}

TEST_CASE("attention keep mask equals -1e9 additive bias") {
  Rng rng(11);
  int a = 3, b = 5, d = 8, heads = 2;
  auto mk = [&](Shape s) {
    std::vector<double> vals(static_cast<std::size_t>(shape_numel(s)));
    for (auto& x : vals) x = rng.normal();
    return Tensor::from_data(s, vals);
  };
  auto q = mk({a, d}), k = mk({b, d}), v = mk({b, d});
  std::vector<std::uint8_t> keepv(static_cast<std::size_t>(a * b), 1);
  keepv[1] = 0;
  keepv[7] = 0;
  keepv[12] = 0;
  BoolMask keep{{a, b}, keepv};
  std::vector<double> biasv(static_cast<std::size_t>(heads * a * b), 0.0);
  for (int h = 0; h < heads; ++h)
    for (int i = 0; i < a * b; ++i)
      if (!keepv[static_cast<std::size_t>(i)]) biasv[static_cast<std::size_t>(h * a * b + i)] = -1e9;
  auto bias = Tensor::from_data({heads, a, b}, biasv);
  auto y_keep = attention<double>(q, k, v, heads, nullptr, &keep);
  auto y_bias = attention(q, k, v, heads, &bias, nullptr);
  for (int i = 0; i < a * d; ++i)
    CHECK(y_keep.value_at(i) == doctest::Approx(y_bias.value_at(i)).epsilon(1e-6));
}

TEST_CASE("attention rejects non-divisible head count") {
  auto q = Tensor::from_data({1, 3}, {1.0, 2.0, 3.0});
  CHECK_THROWS_AS(attention(q, q, q, 2), std::runtime_error);
}

TEST_CASE("mlp examples") {
  // Zero weights and biases -> zeros.
  MlpWeights<double> zw;
  zw.w = {Tensor::constant({3, 2}, 0.0), Tensor::constant({2, 2}, 0.0)};
  zw.b = {Tensor::constant({2}, 0.0), Tensor::constant({2}, 0.0)};
  auto x = Tensor::from_data({1, 3}, {1.0, -2.0, 3.0});
  auto y = mlp(x, zw, Activation::kGelu);
  CHECK(y.value_at(0) == 0.0);
  CHECK(y.value_at(1) == 0.0);

  // Identity single layer, no activation applied after the last layer.
  MlpWeights<double> id;
  id.w = {Tensor::from_data({2, 2}, {1.0, 0.0, 0.0, 1.0})};
  id.b = {Tensor::constant({2}, 0.0)};
  auto x2 = Tensor::from_data({1, 2}, {4.0, -5.0});
  auto y2 = mlp(x2, id, Activation::kNone);
  CHECK(y2.value_at(0) == doctest::Approx(4.0));
  CHECK(y2.value_at(1) == doctest::Approx(-5.0));

  // 1->1 net, both layers w=2 b=1, relu between: input -3 gives
  // relu(2*(-3)+1) = 0, then outer layer 2*0+1 = 1.
  MlpWeights<double> net;
  net.w = {Tensor::from_data({1, 1}, {2.0}), Tensor::from_data({1, 1}, {2.0})};
  net.b = {Tensor::from_data({1}, {1.0}), Tensor::from_data({1}, {1.0})};
  auto x3 = Tensor::from_data({1, 1}, {-3.0});
  auto y3 = mlp(x3, net, Activation::kRelu);
  CHECK(y3.value_at(0) == doctest::Approx(1.0));
}

TEST_CASE("backward quadratic gives 2p") {
  ParamStore ps;
  Rng rng(3);
  auto& p = ps.create_normal("p", {5}, 1.0, rng);
  auto loss = sum_all(mul(p, p));
  ps.zero_grad();
  backward(loss);
  for (int i = 0; i < 5; ++i)
    CHECK(p.grad()[static_cast<std::size_t>(i)] == doctest::Approx(2.0 * p.value_at(i)).epsilon(1e-12));
}

TEST_CASE("backward through sigmoid matches closed form") {
  ParamStore ps;
  auto& w = ps.create("w", {3}, {0.2, -0.4, 0.9});
  auto x = Tensor::from_data({3}, {1.5, -2.0, 0.5});
  auto z = sum_all(mul(w, x));
  auto s = sigmoid_t(z);
  ps.zero_grad();
  backward(s);
  double zz = 0.2 * 1.5 + (-0.4) * (-2.0) + 0.9 * 0.5;
  double sig = 1.0 / (1.0 + std::exp(-zz));
  for (int i = 0; i < 3; ++i)
    CHECK(w.grad()[static_cast<std::size_t>(i)] ==
          doctest::Approx(sig * (1 - sig) * x.value_at(i)).epsilon(1e-10));
}

TEST_CASE("unused parameter has exactly zero gradient") {
  ParamStore ps;
  Rng rng(5);
  auto& used = ps.create_normal("used", {2}, 1.0, rng);
  auto& unused = ps.create_normal("unused", {4}, 1.0, rng);
  auto loss = sum_all(mul(used, used));
  ps.zero_grad();
  backward(loss);
  for (int i = 0; i < 4; ++i) CHECK(unused.grad()[static_cast<std::size_t>(i)] == 0.0);
}

TEST_CASE("backward rejects non-scalar loss") {
  ParamStore ps;
  auto& p = ps.create("p", {2}, {1.0, 2.0});
  auto y = mul(p, p);
  CHECK_THROWS_AS(backward(y), std::runtime_error);
}

TEST_CASE("finite_diff_check quadratic is exact to rounding") {
  ParamStore ps;
  Rng rng(17);
  ps.create_normal("p", {8}, 1.0, rng);
  auto loss_fn = [&]() { return sum_all(mul(ps.at("p"), ps.at("p"))); };
  double err = finite_diff_check<double>(loss_fn, ps, 1e-5, 16, 1);
  CHECK(err <= 1e-8);
}

TEST_CASE("finite_diff_check through mlp + bce") {
  ParamStore ps;
  Rng rng(23);
  ps.create_normal("w1", {4, 8}, 0.5, rng);
  ps.create_normal("b1", {8}, 0.1, rng);
  ps.create_normal("w2", {8, 3}, 0.5, rng);
  ps.create_normal("b2", {3}, 0.1, rng);
  auto x = Tensor::from_data({2, 4}, {0.2, -0.5, 1.0, 0.3, -1.2, 0.8, 0.1, -0.4});
  auto targets = Tensor::from_data({2, 3}, {1.0, 0.0, 1.0, 0.0, 1.0, 0.0});
  auto loss_fn = [&]() {
    MlpWeights<double> w;
    w.w = {ps.at("w1"), ps.at("w2")};
    w.b = {ps.at("b1"), ps.at("b2")};
    auto logits = mlp(x, w, Activation::kGelu);
    return mean_all(bce_with_logits(logits, targets));
  };
  double err = finite_diff_check<double>(loss_fn, ps, 1e-5, 40, 2);
  CHECK(err <= 1e-6);
}

TEST_CASE("finite_diff_check detects nondeterminism") {
  ParamStore ps;
  ps.create("p", {1}, {1.0});
  int calls = 0;
  auto loss_fn = [&]() {
    ++calls;
    return mul_scalar(sum_all(ps.at("p")), static_cast<double>(calls));
  };
  CHECK_THROWS_AS(finite_diff_check<double>(loss_fn, ps, 1e-5, 1, 0), std::runtime_error);
}

TEST_CASE("gradcheck through mixed ops used by the models") {
  ParamStore ps;
  Rng rng(31);
  ps.create_normal("w", {6, 6}, 0.4, rng);
  ps.create_normal("g", {6}, 0.2, rng);
  ps.create_normal("b", {6}, 0.2, rng);
  auto x = Tensor::from_data({4, 6}, [&] {
    std::vector<double> v(24);
    for (auto& e : v) e = rng.normal();
    return v;
  }());
  std::vector<std::int64_t> idx = {0, 2, 2, 3, 1, 0};
  auto loss_fn = [&]() {
    auto gamma = add_scalar(ps.at("g"), 1.0);
    auto h = linear(x, ps.at("w"));
    h = layer_norm(h, gamma, ps.at("b"), 1e-5);
    h = gelu(h);
    auto gathered = gather0(h, idx);                       // [6, 6]
    auto resh = reshape(gathered, {2, 3, 6});
    auto summed = sum_axis(resh, 1);                       // [2, 6]
    auto sm = softmax(summed);
    auto prod = matmul(sm, transpose(ps.at("w")));         // [2, 6]
    auto sq = mul(prod, prod);
    auto d = div(sum_all(sq), add_scalar(sum_all(abs_t(sm)), 1.0));
    return mean_all(d);
  };
  double err = finite_diff_check<double>(loss_fn, ps, 1e-6, 60, 3);
  CHECK(err <= 1e-6);
}

TEST_CASE("broadcasting add/mul") {
  auto a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  auto b = Tensor::from_data({3}, {10, 20, 30});
  auto y = add(a, b);
  CHECK(y.value_at(0) == 11);
  CHECK(y.value_at(5) == 36);
  auto c = Tensor::from_data({2, 1}, {2, 3});
  auto z = mul(a, c);
  CHECK(z.value_at(0) == 2);
  CHECK(z.value_at(3) == 12);

  // Gradient reduction over broadcast axes.
  ParamStore ps;
  auto& p = ps.create("p", {3}, {1.0, 2.0, 3.0});
  auto loss = sum_all(mul(a, p));
  ps.zero_grad();
  backward(loss);
  CHECK(p.grad()[0] == doctest::Approx(1 + 4));
  CHECK(p.grad()[1] == doctest::Approx(2 + 5));
  CHECK(p.grad()[2] == doctest::Approx(3 + 6));
}

TEST_CASE("operations are deterministic") {
  Rng rng(41);
  std::vector<double> v(30), w(36);
  for (auto& e : v) e = rng.normal();
  for (auto& e : w) e = rng.normal();
  auto t = Tensor::from_data({5, 6}, v);
  auto y1 = softmax(linear(t, Tensor::from_data({6, 6}, w)));
  auto y2 = softmax(linear(t, Tensor::from_data({6, 6}, w)));
  for (int i = 0; i < 30; ++i) CHECK(y1.value_at(i) == y2.value_at(i));
}

TEST_CASE("f32 tensors work through the same ops") {
  TensorT<float> a = TensorT<float>::from_data({2, 2}, {1.f, 2.f, 3.f, 4.f});
  auto y = softmax(mul_scalar(a, 0.5f));
  CHECK(y.value_at(0) == doctest::Approx(1.0 / (1.0 + std::exp(0.5))).epsilon(1e-5));
  ParamStoreT<float> ps;
  ps.create("p", {2}, {1.f, 2.f});
  auto loss = sum_all(mul(ps.at("p"), ps.at("p")));
  ps.zero_grad();
  backward(loss);
  CHECK(ps.at("p").grad()[0] == doctest::Approx(2.f));
}

TEST_CASE("checkpoint round trip preserves values, step, and order") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "vg3d_ckpt_test";
  fs::remove_all(dir);
  ParamStore ps;
  Rng rng(51);
  ps.create_normal("a/w", {3, 4}, 1.0, rng);
  ps.create_normal("b/v", {7}, 1.0, rng);
  ps.step = 42;
  save_checkpoint(ps, dir);
  auto loaded = load_checkpoint<double>(dir);
  CHECK(loaded.step == 42);
  REQUIRE(loaded.names() == ps.names());
  for (const auto& name : ps.names()) {
    const auto& a = ps.at(name).values();
    const auto& b = loaded.at(name).values();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  }
  fs::remove_all(dir);
}

TEST_CASE("checkpoint rejects truncated blob and bad version") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "vg3d_ckpt_bad";
  fs::remove_all(dir);
  ParamStore ps;
  Rng rng(52);
  ps.create_normal("w", {16}, 1.0, rng);
  save_checkpoint(ps, dir);
  // Truncate the blob.
  fs::resize_file(dir / "checkpoint.bin", 8);
  CHECK_THROWS_AS(load_checkpoint<double>(dir), std::runtime_error);
  // Corrupt the version.
  save_checkpoint(ps, dir);
  {
    std::ifstream in(dir / "checkpoint.json");
    nlohmann::json j;
    in >> j;
    j["version"] = 999;
    std::ofstream out(dir / "checkpoint.json", std::ios::trunc);
    out << j.dump();
  }
  CHECK_THROWS_AS(load_checkpoint<double>(dir), std::runtime_error);
  fs::remove_all(dir);
}
