// Tokenizer and generator checks on the single-precision build used in
// production.

#include <cmath>
#include <set>

#include "acceptance.hpp"
#include "motionkit/fsq.hpp"
#include "motionkit/generator.hpp"
#include "motionkit/synth.hpp"

using namespace motionkit;

namespace acceptance {

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }

std::vector<int> random_ids(Rng& rng, std::size_t n, std::size_t hi) {
  std::vector<int> ids(n);
  for (auto& id : ids) id = static_cast<int>(rng.below(hi));
  return ids;
}

gen::GenConfig toy_config() {
  gen::GenConfig c;
  c.layers = 2;
  c.width = 32;
  c.heads = 2;
  c.ffn_expansion = 2;
  c.code_vocabulary = 16;
  c.max_text_length = 16;
  c.max_motion_length = 12;
  return c;
}

}  // namespace

Outcome fsq_correctness() {
  using namespace fsq;
  std::size_t failures = 0, checked = 0;
  auto expect = [&](bool ok) {
    ++checked;
    failures += ok ? 0 : 1;
  };

  // z = logit(k / (L - 1)) sits exactly on level k
  for (int L = 2; L <= 8; ++L) {
    const std::vector<int> levels{L};
    for (int k = 0; k < L; ++k) {
      const double z = k == 0 ? -40.0 : k == L - 1 ? 40.0 : logit(static_cast<double>(k) / (L - 1));
      const auto q = fsq_quantize(std::span(&z, 1), levels);
      expect(q.codes[0] == k);
      expect(std::abs(q.values[0] - static_cast<double>(k) / (L - 1)) < 1e-12);
    }
  }
  // sigmoid(0) = 1/2: 3.5 rounds to 4 for L = 8, 2 exactly for L = 5
  const double zero = 0.0;
  expect(fsq_quantize(std::span(&zero, 1), std::vector<int>{8}).codes[0] == 4);
  expect(fsq_quantize(std::span(&zero, 1), std::vector<int>{5}).codes[0] == 2);

  const std::vector<int> mixed{3, 4, 5};
  std::set<std::uint32_t> indices;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 5; ++c) {
        const std::vector<int> codes{a, b, c};
        const auto idx = codes_to_index(codes, mixed);
        expect(idx < 60 && index_to_codes(idx, mixed) == codes);
        indices.insert(idx);
      }
  expect(indices.size() == 60);

  const std::vector<int> nine{3, 3};
  std::set<std::uint32_t> reached;
  for (double x = -6; x <= 6; x += 0.5)
    for (double y = -6; y <= 6; y += 0.5) {
      const nn::Tensor z = nn::Tensor::from({1, 2}, {static_cast<nn::Scalar>(x), static_cast<nn::Scalar>(y)});
      reached.insert(codes_to_index(fsq_codes(z, nine)[0], nine));
    }
  expect(reached.size() == 9);

  // the rounding step passes the upstream gradient through unchanged
  Rng rng(4);
  std::vector<nn::Scalar> xv(24), wv(24);
  for (auto& v : xv) v = static_cast<nn::Scalar>(rng.uniform(-5, 5));
  for (auto& v : wv) v = static_cast<nn::Scalar>(rng.normal());
  const nn::Tensor x = nn::Tensor::from({4, 6}, xv, true);
  const nn::Tensor w = nn::Tensor::from({4, 6}, wv);
  nn::backward(nn::sum(nn::mul(nn::round_ste(x), w)));
  bool identity = true;
  for (std::size_t i = 0; i < xv.size(); ++i) identity = identity && x.grad()[i] == wv[i];
  expect(identity);

  return {failures == 0, detail() << checked << " checks (fixed points for L = 2..8, (3,4,5) bijection, (3,3) "
                                  << "reachability " << reached.size() << "/9, STE gradient), " << failures << " failed"};
}

Outcome mask_causality() {
  std::size_t mask_errors = 0, leaks = 0, dead = 0, pairs = 0;
  for (std::size_t w = 0; w <= 8; ++w)
    for (std::size_t n = 1; n <= 8; ++n) {
      const auto m = gen::build_hybrid_mask(w, n);
      for (std::size_t i = 0; i < w + n; ++i)
        for (std::size_t j = 0; j < w + n; ++j) {
          const bool expected = j < w || (i >= w && j <= i);
          mask_errors += m[i][j] == expected ? 0 : 1;
        }
    }

  gen::GenConfig c = toy_config();
  c.max_text_length = 8;
  c.max_motion_length = 8;
  const gen::GeneratorModel model(c, 3);
  const std::size_t vocab = c.vocabulary();
  Rng rng(4);
  for (std::size_t w = 0; w <= 8; ++w)
    for (std::size_t n = 1; n <= 8; ++n) {
      const auto text = random_ids(rng, w, 256);
      const auto motion = random_ids(rng, n, vocab);
      const auto base = model.forward_logits(text, motion);
      for (std::size_t j = 0; j < n; ++j) {
        auto changed = motion;
        changed[j] = static_cast<int>((static_cast<std::size_t>(changed[j]) + 1 + rng.below(vocab - 1)) % vocab);
        const auto other = model.forward_logits(text, changed);
        bool moved = false;
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t v = 0; v < vocab; ++v) {
            if (r < j && other.at(r, v) != base.at(r, v)) ++leaks;
            if (r == j && other.at(r, v) != base.at(r, v)) moved = true;
          }
        dead += moved ? 0 : 1;
        ++pairs;
      }
    }
  return {mask_errors == 0 && leaks == 0 && dead == 0,
          detail() << "mask vs closed form for w <= 8, n <= 8: " << mask_errors << " mismatches; " << pairs
                   << " future perturbations: " << leaks << " changed earlier logits, " << dead
                   << " left their own position unchanged"};
}

Outcome loss_sanity() {
  std::string init_detail;
  bool init_ok = true;
  for (std::size_t vocab : {16, 1000}) {
    gen::GenConfig c = toy_config();
    c.code_vocabulary = vocab;
    const gen::GeneratorModel model(c, 7);
    Rng rng(8);
    double total = 0.0;
    for (int i = 0; i < 8; ++i) {
      std::vector<std::uint32_t> codes(10);
      for (auto& code : codes) code = static_cast<std::uint32_t>(rng.below(vocab));
      const auto ex = gen::make_example(gen::tokenize_text("some prompt", 16), codes, c);
      total += gen::ce_loss(model.forward_logits(ex.text, ex.inputs), ex.targets).item() / 8.0;
    }
    const double ln_v = std::log(static_cast<double>(c.vocabulary()));
    const double rel = std::abs(total - ln_v) / ln_v;
    init_ok = init_ok && rel < 0.05;
    init_detail += detail() << "V=" << c.vocabulary() << " loss " << total << " vs ln V " << ln_v << "; ";
  }

  const std::vector<std::pair<std::string, std::vector<std::uint32_t>>> raw{
      {"walk forward", {1, 2, 3, 4, 5}},  {"turn left", {7, 7, 8}},
      {"jump", {15, 0, 15, 0, 15, 0}},    {"sit down slowly", {3, 9, 9, 9, 2, 11, 12}},
      {"wave", {4, 4}},
  };
  std::vector<gen::PairedExample> pairs;
  for (const auto& [text, codes] : raw) pairs.push_back({text, gen::tokenize_text(text, 16), {text, codes, codes.size() * 4, 30.0}});
  gen::GeneratorModel model(toy_config(), 11);
  gen::GenTrainConfig tc;
  tc.steps = 2000;
  tc.batch = 5;
  tc.adam.learning_rate = 1e-3;
  tc.seed = 12;
  const auto result = gen::train_generator(model, pairs, tc);
  std::size_t exact = 0;
  for (const auto& p : pairs) {
    const auto s = gen::sample_autoregressive(model, p.prompt, {});
    exact += s.codes == p.tokens.indices && !s.truncated ? 1 : 0;
  }
  const bool pass = init_ok && result.losses.back() < 0.1 && exact == pairs.size();
  return {pass, detail() << init_detail << "memorization loss " << result.losses.front() << " -> " << result.losses.back()
                         << " (< 0.1), greedy exact " << exact << "/" << pairs.size()};
}

Outcome wavelet_ablation() {
  const auto body = geom::Skeleton::default_body();
  Rng rng(1);
  synth::MotionParams p;
  p.frames = 96;
  std::vector<repr::MotionSequence> train, held_out;
  for (int i = 0; i < 60; ++i) {
    auto m = synth::random_motion(body, p, rng);
    synth::add_rotation_noise(m, 0.01, rng);
    (i < 48 ? train : held_out).push_back(std::move(m));
  }
  std::vector<repr::FeatureMatrix> features;
  for (const auto& m : train) features.push_back(repr::to_matrix(repr::encode_features(m, body)));

  fsq::ReconstructionReport reports[2];
  for (int variant = 0; variant < 2; ++variant) {
    fsq::FsqConfig c;
    c.width = 64;
    c.depth = 1;
    c.use_wavelet = variant == 0;
    fsq::TokenizerModel model(c, repr::feature_width(body.joint_count()), 7);
    fsq::TrainConfig tc;
    tc.steps = 600;
    tc.batch = 4;
    tc.window = 64;
    tc.seed = 8;
    fsq::train_reconstruction(model, features, tc);
    reports[variant] = fsq::eval_reconstruction(model, held_out, body);
  }
  const auto& wave = reports[0];
  const auto& plain = reports[1];
  const double dev_wave = std::abs(wave.mean_acceleration - wave.gt_mean_acceleration);
  const double dev_plain = std::abs(plain.mean_acceleration - plain.gt_mean_acceleration);
  const bool pass = dev_wave < dev_plain && wave.mpjpe_mm <= 1.10 * plain.mpjpe_mm;
  return {pass, detail() << "|acc - gt| wavelet " << dev_wave << " vs plain " << dev_plain << " m/s^2; MPJPE wavelet "
                         << wave.mpjpe_mm << " vs plain " << plain.mpjpe_mm << " mm (allowed +10%)"};
}

}  // namespace acceptance
