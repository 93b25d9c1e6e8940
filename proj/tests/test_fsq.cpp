#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>

#include "doctest.h"
#include "motionkit/fsq.hpp"
#include "motionkit/synth.hpp"

using namespace motionkit;
using namespace motionkit::fsq;

namespace {

double logit(double p) { return std::log(p) - std::log1p(-p); }

Eigen::MatrixXd sinusoid_clip(Rng& rng, std::size_t frames, std::size_t width) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(width));
  for (std::size_t c = 0; c < width; ++c) {
    const double amp = rng.uniform(0.5, 2.0), freq = rng.uniform(0.02, 0.15), phase = rng.uniform(0, 6.28);
    const double offset = rng.uniform(-1, 1);
    for (std::size_t f = 0; f < frames; ++f)
      m(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(c)) =
          offset + amp * std::sin(2 * std::numbers::pi * freq * static_cast<double>(f) + phase);
  }
  return m;
}

FsqConfig small_config() {
  FsqConfig c;
  c.levels = {5, 5, 5, 5};
  c.width = 32;
  c.depth = 1;
  return c;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("motionkit_test_fsq_" + name);
}

}  // namespace

TEST_CASE("scalar quantization") {
  const std::vector<int> eight{8};
  const double zero = 0.0;
  CHECK(fsq_quantize(std::span(&zero, 1), eight).codes[0] == 4);  // 3.5 rounds away from zero
  const double big = 20.0, small = -20.0;
  CHECK(fsq_quantize(std::span(&big, 1), eight).codes[0] == 7);
  CHECK(fsq_quantize(std::span(&small, 1), eight).codes[0] == 0);
  CHECK(fsq_quantize(std::span(&big, 1), eight).values[0] == doctest::Approx(1.0));
  CHECK_THROWS_AS(fsq_quantize(std::span(&big, 1), std::vector<int>{1}), Error);
  CHECK_THROWS_AS(fsq_quantize(std::span(&big, 1), std::vector<int>{4, 4}), Error);
}

TEST_CASE("quantization is idempotent through the logit of its values") {
  const std::vector<int> levels{8, 5, 3, 2, 7};
  Rng rng(1);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> z(levels.size());
    for (auto& v : z) v = rng.uniform(-8, 8);
    const auto q = fsq_quantize(z, levels);
    std::vector<double> back;
    for (double v : q.values) back.push_back(logit(v));
    CHECK(fsq_quantize(back, levels).codes == q.codes);
  }
}

TEST_CASE("tensor quantization matches the scalar path and passes gradients straight through") {
  const std::vector<int> levels{8, 8, 8, 5, 5, 5};
  Rng rng(2);
  std::vector<Scalar> zv(5 * 6);
  for (auto& v : zv) v = static_cast<Scalar>(rng.uniform(-4, 4));
  const Tensor z = Tensor::from({5, 6}, zv, true);
  const Tensor q = fsq_quantize(z, levels);
  const auto codes = fsq_codes(z, levels);
  for (std::size_t r = 0; r < 5; ++r) {
    std::vector<double> row(zv.begin() + static_cast<long>(6 * r), zv.begin() + static_cast<long>(6 * r + 6));
    const auto ref = fsq_quantize(row, levels);
    CHECK(codes[r] == ref.codes);
    for (std::size_t j = 0; j < 6; ++j) CHECK(q.at(r, j) == doctest::Approx(ref.values[j]).epsilon(1e-6));
  }
  nn::backward(nn::sum(q));
  // d/dz [sigmoid(z) (L-1) / (L-1)] = sigmoid'(z)
  for (std::size_t i = 0; i < zv.size(); ++i) {
    const double s = 1.0 / (1.0 + std::exp(-static_cast<double>(zv[i])));
    CHECK(z.grad()[i] == doctest::Approx(s * (1 - s)).epsilon(1e-5));
    CHECK(z.grad()[i] != 0);
  }
}

TEST_CASE("mixed radix indices") {
  CHECK(codes_to_index(std::vector<int>{3, 5}, std::vector<int>{8, 8}) == 29);
  CHECK(index_to_codes(29, std::vector<int>{8, 8}) == std::vector<int>{3, 5});

  const std::vector<int> levels{3, 4, 5};
  std::set<std::uint32_t> seen;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 5; ++c) {
        const std::vector<int> codes{a, b, c};
        const auto idx = codes_to_index(codes, levels);
        CHECK(idx < 60);
        CHECK(index_to_codes(idx, levels) == codes);
        seen.insert(idx);
      }
  CHECK(seen.size() == 60);
  CHECK_THROWS_AS(codes_to_index(std::vector<int>{3, 0, 0}, levels), Error);
  CHECK_THROWS_AS(index_to_codes(60, levels), Error);

  // every index of a (3, 3) grid is reachable from some latent
  const std::vector<int> nine{3, 3};
  std::set<std::uint32_t> reached;
  for (double x = -6; x <= 6; x += 0.25)
    for (double y = -6; y <= 6; y += 0.25)
      reached.insert(codes_to_index(fsq_quantize(std::vector<double>{x, y}, nine).codes, nine));
  CHECK(reached.size() == 9);
}

TEST_CASE("config validation and json") {
  FsqConfig c;
  CHECK(c.vocabulary_size() == 64000);
  const auto round = FsqConfig::from_json(c.to_json());
  CHECK(round.to_json() == c.to_json());

  nlohmann::json j = c.to_json();
  j["extra"] = 1;
  CHECK_THROWS_AS(FsqConfig::from_json(j), Error);
  j = c.to_json();
  j["wavelet_boundary"] = "symmetric";
  CHECK_THROWS_AS(FsqConfig::from_json(j), Error);
  j = c.to_json();
  j["wavelet_levels"] = 3;  // 8 > downsample 4
  CHECK_THROWS_AS(FsqConfig::from_json(j), Error);
  j = c.to_json();
  j["levels"] = {16, 16, 16, 16, 16, 16};
  CHECK_THROWS_AS(FsqConfig::from_json(j), Error);
  j = c.to_json();
  j["levels"] = {8, 1};
  CHECK_THROWS_AS(FsqConfig::from_json(j), Error);
}

TEST_CASE("slot layout is invertible and energy preserving") {
  Rng rng(3);
  for (bool wave : {true, false}) {
    for (int lv : {1, 2}) {
      for (auto family : {wavelet::Family::kHaar, wavelet::Family::kDb2}) {
        FsqConfig c = small_config();
        c.use_wavelet = wave;
        c.wavelet_levels = lv;
        c.wavelet_family = family;
        const TokenizerModel model(c, 7, 1);
        for (std::size_t frames : {4, 9, 16, 37}) {
          Eigen::MatrixXd x = Eigen::MatrixXd::Random(static_cast<Eigen::Index>(frames), 7);
          const auto layout = model.to_layout(x);
          const std::size_t padded = token_count(frames, 4) * 4;
          CHECK(static_cast<std::size_t>(layout.rows()) == padded >> lv);
          CHECK(layout.cols() == 7 << lv);
          CHECK((model.from_layout(layout, frames) - x).cwiseAbs().maxCoeff() < 1e-10);
          Eigen::MatrixXd padded_x(static_cast<Eigen::Index>(padded), 7);
          padded_x.topRows(static_cast<Eigen::Index>(frames)) = x;
          for (auto r = static_cast<Eigen::Index>(frames); r < padded_x.rows(); ++r) padded_x.row(r) = x.row(x.rows() - 1);
          CHECK(layout.squaredNorm() == doctest::Approx(padded_x.squaredNorm()).epsilon(1e-10));
        }
      }
    }
  }
  const TokenizerModel model(small_config(), 7, 1);
  CHECK_THROWS_AS(model.to_layout(Eigen::MatrixXd::Zero(3, 7)), Error);
  CHECK_THROWS_AS(model.to_layout(Eigen::MatrixXd::Zero(8, 6)), Error);
}

TEST_CASE("token count is ceil(T / downsample)") {
  TokenizerModel model(small_config(), 5, 2);
  Rng rng(4);
  for (std::size_t frames = 8; frames <= 200; ++frames) {
    const std::size_t expected = (frames + 3) / 4;
    CHECK(token_count(frames, 4) == expected);
    if (frames % 17 == 0 || frames < 12) {
      const auto tokens = model.encode(sinusoid_clip(rng, frames, 5), "c", 30.0);
      CHECK(tokens.indices.size() == expected);
      CHECK(tokens.frame_count == frames);
      CHECK(model.decode(tokens).rows() == static_cast<Eigen::Index>(frames));
    }
  }
}

TEST_CASE("encoding is deterministic and survives a checkpoint") {
  Rng rng(5);
  std::vector<repr::FeatureMatrix> corpus;
  for (int i = 0; i < 4; ++i) corpus.push_back(sinusoid_clip(rng, 40, 6));
  TokenizerModel a(small_config(), 6, 11);
  TokenizerModel b(small_config(), 6, 11);
  TrainConfig tc;
  tc.steps = 5;
  tc.batch = 2;
  tc.seed = 3;
  train_reconstruction(a, corpus, tc);
  train_reconstruction(b, corpus, tc);
  const auto ta = a.encode(corpus[0], "x", 30.0);
  CHECK(ta.indices == b.encode(corpus[0], "x", 30.0).indices);
  CHECK(ta.indices == a.encode(corpus[0], "x", 30.0).indices);

  const auto path = temp_path("ckpt.bin");
  a.save(path, 11, 5);
  const auto loaded = TokenizerModel::load(path);
  CHECK(loaded.encode(corpus[0], "x", 30.0).indices == ta.indices);
  CHECK((loaded.decode(ta) - a.decode(ta)).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(nn::config_hash(loaded.model_json()) == nn::config_hash(a.model_json()));
  std::filesystem::remove(path);
}

TEST_CASE("token files roundtrip") {
  TokenFile file;
  file.config_hash = "abc";
  file.vocabulary_size = 625;
  file.downsample = 4;
  file.sequences.push_back({"first", {0, 5, 624}, 10, 30.0});
  file.sequences.push_back({"second", {17}, 4, 20.0});
  const auto path = temp_path("tokens.bin");
  write_tokens(path, file);
  const auto back = read_tokens(path);
  CHECK(back.config_hash == "abc");
  CHECK(back.vocabulary_size == 625);
  REQUIRE(back.sequences.size() == 2);
  CHECK(back.sequences[0].indices == file.sequences[0].indices);
  CHECK(back.sequences[1].clip_id == "second");
  CHECK(back.sequences[1].fps == 20.0);
  CHECK(back.sequences[0].frame_count == 10);

  file.sequences[1].indices = {625};
  CHECK_THROWS_AS(write_tokens(path, file), Error);
  std::filesystem::remove(path);
}

TEST_CASE("reconstruction training reduces the loss") {
  Rng rng(6);
  std::vector<repr::FeatureMatrix> corpus;
  for (int i = 0; i < 20; ++i) corpus.push_back(sinusoid_clip(rng, 64, 4));
  FsqConfig c;
  c.levels = {8, 8, 8, 5, 5, 5};
  c.width = 48;
  c.depth = 1;
  TokenizerModel model(c, 4, 7);
  TrainConfig tc;
  tc.steps = 500;
  tc.batch = 4;
  tc.window = 32;
  tc.seed = 8;
  const auto result = train_reconstruction(model, corpus, tc);
  REQUIRE(result.losses.size() == 500);
  double head = 0, tail = 0;
  for (int i = 0; i < 10; ++i) head += result.losses[static_cast<std::size_t>(i)] / 10;
  for (int i = 490; i < 500; ++i) tail += result.losses[static_cast<std::size_t>(i)] / 10;
  MESSAGE("loss " << head << " -> " << tail);
  CHECK(tail < 0.25 * head);

  TokenizerModel untrained(c, 4, 7);
  untrained.set_norm(model.norm());
  double err_trained = 0, err_untrained = 0;
  for (const auto& clip : corpus) {
    err_trained += (model.reconstruct(clip) - clip).squaredNorm();
    err_untrained += (untrained.reconstruct(clip) - clip).squaredNorm();
  }
  CHECK(err_trained < 0.5 * err_untrained);
}

TEST_CASE("training rejects bad input") {
  TokenizerModel model(small_config(), 4, 1);
  TrainConfig tc;
  CHECK_THROWS_AS(train_reconstruction(model, {}, tc), Error);
  CHECK_THROWS_AS(train_reconstruction(model, {Eigen::MatrixXd::Zero(3, 4)}, tc), Error);
}
