#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "grad_check.hpp"
#include "motionkit/diffcore.hpp"

using namespace motionkit;
using namespace motionkit::nn;
using testing_support::check_gradients;
using testing_support::random_tensor;

namespace {

constexpr double kTol = 1e-4;

template <typename Op>
double check_unary(Op op, Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor x = random_tensor(rng, shape);
  Rng wrng(seed + 1000);
  Tensor w = random_tensor(wrng, op(x).shape(), 1.0, false);
  return check_gradients([&] { return sum(mul(op(x), w)); }, {x}).max_relative_error;
}

}  // namespace

TEST_CASE("forward values of elementwise ops") {
  const Tensor x = Tensor::from({4}, {-2.0, -0.5, 0.0, 3.0});
  CHECK(sigmoid(x).values()[2] == doctest::Approx(0.5));
  CHECK(sigmoid(x).values()[3] == doctest::Approx(1.0 / (1.0 + std::exp(-3.0))));
  CHECK(gelu(x).values()[3] == doctest::Approx(0.5 * 3.0 * (1.0 + std::erf(3.0 / std::sqrt(2.0)))));
  CHECK(gelu(x).values()[2] == 0.0);
}

TEST_CASE("round_ste rounds half away from zero with identity gradient") {
  Tensor x = Tensor::from({6}, {-1.5, -0.5, 0.49, 0.5, 1.5, 2.4}, true);
  Tensor y = round_ste(x);
  const std::vector<Scalar> expected{-2, -1, 0, 1, 2, 2};
  CHECK(y.values() == expected);
  Tensor w = Tensor::from({6}, {1, 2, 3, 4, 5, 6});
  backward(sum(mul(y, w)));
  CHECK(x.grad() == w.values());
}

TEST_CASE("softmax rows sum to one and cross entropy of uniform logits is ln V") {
  Rng rng(1);
  Tensor x = random_tensor(rng, {3, 7});
  const Tensor s = softmax(x);
  for (std::size_t r = 0; r < 3; ++r) {
    double total = 0;
    for (std::size_t c = 0; c < 7; ++c) total += s.at(r, c);
    CHECK(total == doctest::Approx(1.0));
  }
  for (int vocab : {2, 10, 259}) {
    const Tensor logits = Tensor::full({4, static_cast<std::size_t>(vocab)}, 0.3);
    const std::vector<int> targets{0, 1, vocab - 1, kIgnoreIndex};
    CHECK(cross_entropy(logits, targets).item() == doctest::Approx(std::log(vocab)));
  }
  const std::vector<int> none{kIgnoreIndex, kIgnoreIndex};
  CHECK(cross_entropy(Tensor::zeros({2, 3}), none).item() == 0.0);
}

TEST_CASE("rms_norm output has unit root mean square") {
  Rng rng(2);
  Tensor x = random_tensor(rng, {5, 8}, 3.0);
  const Tensor y = rms_norm(x, Tensor::full({8}, 1.0));
  for (std::size_t r = 0; r < 5; ++r) {
    double ms = 0;
    for (std::size_t c = 0; c < 8; ++c) ms += y.at(r, c) * y.at(r, c);
    CHECK(ms / 8 == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("shape errors name both shapes") {
  const Tensor a = Tensor::zeros({2, 3});
  const Tensor b = Tensor::zeros({4, 5});
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2, 3] and [4, 5]"), Error);
  CHECK_THROWS_AS(add(a, b), Error);
  CHECK_THROWS_AS(mul(a, b), Error);
  CHECK_THROWS_AS(backward(a), Error);
  const std::vector<int> bad{7};
  CHECK_THROWS_AS(embedding(Tensor::zeros({3, 2}), bad), Error);
}

TEST_CASE("backward basics") {
  Tensor x = Tensor::from({2, 2}, {1, -2, 3, 0.5}, true);
  backward(sum(x));
  for (Scalar g : x.grad()) CHECK(g == 1.0);
  x.zero_grad();
  backward(sum(mul(x, x)));
  for (std::size_t i = 0; i < 4; ++i) CHECK(x.grad()[i] == doctest::Approx(2 * x.values()[i]));

  // an unused parameter keeps a zero gradient
  Tensor unused = Tensor::zeros({3}, true);
  unused.zero_grad();
  backward(sum(x));
  for (Scalar g : unused.grad()) CHECK(g == 0.0);
}

TEST_CASE("primitive gradients match central differences") {
  CHECK(check_unary([](const Tensor& x) { return sigmoid(x); }, {3, 4}, 1) < kTol);
  CHECK(check_unary([](const Tensor& x) { return tanh(x); }, {3, 4}, 2) < kTol);
  CHECK(check_unary([](const Tensor& x) { return gelu(x); }, {3, 4}, 3) < kTol);
  CHECK(check_unary([](const Tensor& x) { return softmax(x); }, {3, 5}, 4) < kTol);
  CHECK(check_unary([](const Tensor& x) { return transpose(x); }, {3, 5}, 5) < kTol);
  CHECK(check_unary([](const Tensor& x) { return reshape(x, {5, 3}); }, {3, 5}, 6) < kTol);
  CHECK(check_unary([](const Tensor& x) { return unfold_rows(x, 1); }, {5, 3}, 7) < kTol);
  CHECK(check_unary([](const Tensor& x) { return slice_cols(x, 1, 4); }, {3, 5}, 8) < kTol);
  CHECK(check_unary([](const Tensor& x) { return slice_rows(x, 1, 3); }, {3, 5}, 9) < kTol);
  CHECK(check_unary([](const Tensor& x) { return scale(add_scalar(x, 0.5), -1.7); }, {3, 5}, 10) < kTol);

  Rng rng(20);
  Tensor a = random_tensor(rng, {3, 4});
  Tensor b = random_tensor(rng, {4, 5});
  Tensor c = random_tensor(rng, {3, 4});
  Tensor bias = random_tensor(rng, {5});
  Tensor gain = random_tensor(rng, {4});
  Tensor table = random_tensor(rng, {6, 4});
  Tensor w35 = random_tensor(rng, {3, 5}, 1.0, false);
  Tensor w34 = random_tensor(rng, {3, 4}, 1.0, false);

  CHECK(check_gradients([&] { return sum(mul(matmul(a, b), w35)); }, {a, b}).max_relative_error < kTol);
  CHECK(check_gradients([&] { return sum(mul(linear(a, b, bias), w35)); }, {a, b, bias}).max_relative_error < kTol);
  CHECK(check_gradients([&] { return sum(mul(add(a, c), w34)); }, {a, c}).max_relative_error < kTol);
  CHECK(check_gradients([&] { return sum(mul(sub(a, c), w34)); }, {a, c}).max_relative_error < kTol);
  CHECK(check_gradients([&] { return sum(mul(mul(a, c), w34)); }, {a, c}).max_relative_error < kTol);
  CHECK(check_gradients([&] { return sum(mul(rms_norm(a, gain), w34)); }, {a, gain}).max_relative_error < kTol);
  CHECK(check_gradients([&] { return mse(a, c); }, {a, c}).max_relative_error < kTol);
  CHECK(check_gradients([&] { return mean(mul(a, a)); }, {a}).max_relative_error < kTol);
  CHECK(check_gradients([&] { return sum(mul(concat_cols({a, c}), concat_cols({w34, w34}))); }, {a, c})
            .max_relative_error < kTol);
  CHECK(check_gradients([&] { return sum(mul(concat_rows({a, c}), concat_rows({w34, w34}))); }, {a, c})
            .max_relative_error < kTol);
  const std::vector<int> ids{0, 5, 2, 5};
  Tensor w44 = random_tensor(rng, {4, 4}, 1.0, false);
  CHECK(check_gradients([&] { return sum(mul(embedding(table, ids), w44)); }, {table}).max_relative_error < kTol);
  Tensor logits = random_tensor(rng, {4, 6});
  const std::vector<int> targets{1, kIgnoreIndex, 5, 0};
  CHECK(check_gradients([&] { return cross_entropy(logits, targets); }, {logits}).max_relative_error < kTol);
}

TEST_CASE("two-layer MLP gradient matches central differences") {
  Rng rng(30);
  Tensor x = random_tensor(rng, {6, 4}, 1.0, false);
  Tensor w1 = random_tensor(rng, {4, 8}, 0.5);
  Tensor b1 = random_tensor(rng, {8}, 0.1);
  Tensor w2 = random_tensor(rng, {8, 3}, 0.5);
  Tensor b2 = random_tensor(rng, {3}, 0.1);
  const std::vector<int> targets{0, 1, 2, 0, 1, 2};
  auto loss = [&] { return cross_entropy(linear(gelu(linear(x, w1, b1)), w2, b2), targets); };
  CHECK(check_gradients(loss, {w1, b1, w2, b2}).max_relative_error < kTol);
}

TEST_CASE("adam") {
  Rng rng(40);
  ParameterStore params;
  Tensor& p = params.add("p", {4}, 1.0, rng);
  const auto before = p.values();
  AdamState state;
  AdamConfig config;
  params.zero_grad();
  adam_step(params, state, config);
  CHECK(p.values() == before);

  // first step with constant gradient g moves every entry by lr * g / |g|
  for (auto& g : p.grad()) g = 0.37;
  AdamState fresh;
  adam_step(params, fresh, config);
  for (std::size_t i = 0; i < 4; ++i) CHECK(before[i] - p.values()[i] == doctest::Approx(config.learning_rate).epsilon(1e-4));

  // quadratic bowl
  ParameterStore bowl;
  Tensor& q = bowl.add("q", {8}, 2.0, rng);
  AdamState s;
  AdamConfig fast;
  fast.learning_rate = 0.01;
  double previous = 1e300;
  double initial = 0.0;
  int increases = 0;
  for (int step = 0; step < 200; ++step) {
    bowl.zero_grad();
    Tensor loss = sum(mul(q, q));
    if (step == 0) initial = loss.item();
    if (step >= 10 && loss.item() > previous) ++increases;
    previous = loss.item();
    backward(loss);
    adam_step(bowl, s, fast);
  }
  CHECK(previous < 0.1 * initial);
  CHECK(increases == 0);
}

TEST_CASE("checkpoint round trip") {
  Rng rng(50);
  ParameterStore params;
  params.add("a", {2, 3}, 1.0, rng);
  params.add("b", {3}, 1.0, rng);
  const auto path = std::filesystem::temp_directory_path() / "motionkit_test_ckpt.bin";
  const nlohmann::json config{{"width", 3}};
  save_checkpoint(path, "fsq", params, config, 7, 11);
  const Checkpoint ck = load_checkpoint(path);
  CHECK(ck.kind == "fsq");
  CHECK(ck.seed == 7);
  CHECK(ck.step == 11);
  CHECK(ck.config == config);
  CHECK(ck.config_hash == config_hash(config));

  ParameterStore other;
  other.add("a", {2, 3}, 0.0, rng);
  other.add("b", {3}, 0.0, rng);
  restore_parameters(ck, other);
  for (std::size_t i = 0; i < 6; ++i)
    CHECK(other.get("a").values()[i] == static_cast<Scalar>(static_cast<float>(params.get("a").values()[i])));

  ParameterStore wrong;
  wrong.add("a", {3, 2}, 0.0, rng);
  wrong.add("b", {3}, 0.0, rng);
  CHECK_THROWS_AS(restore_parameters(ck, wrong), Error);
  std::filesystem::remove(path);
}
