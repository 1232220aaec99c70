#include <doctest.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "disinfo/classifier.hpp"
#include "disinfo/error.hpp"
#include "disinfo/rng.hpp"

using namespace disinfo;
using namespace disinfo::classifier;

namespace {

ModelConfig tiny_config(std::uint64_t seed = 1) {
  ModelConfig c;
  c.text_vocab = 6;
  c.mixed_vocab = 7;
  c.text_dim = 3;
  c.mixed_dim = 2;
  c.svd_k = 2;
  c.sentiment_dim = 1;
  c.text_hidden = 3;
  c.mixed_hidden = 2;
  c.svd_hidden = 2;
  c.head_hidden = 3;
  c.seed = seed;
  return c;
}

FeatureBundle random_bundle(Rng& rng, const ModelConfig& c, std::size_t len = 5) {
  FeatureBundle b;
  for (std::size_t i = 0; i < len; ++i) {
    b.text_ids.push_back(static_cast<features::TokenId>(rng.below(c.text_vocab)));
    b.mixed_ids.push_back(static_cast<features::TokenId>(rng.below(c.mixed_vocab)));
  }
  for (std::size_t i = 0; i < c.svd_k; ++i) b.svd_vec.push_back(rng.normal());
  for (std::size_t i = 0; i < c.sentiment_dim; ++i) b.sentiment_vec.push_back(rng.uniform(-1, 1));
  for (std::size_t i = 0; i < c.external_text_dim; ++i) b.text_vec.push_back(rng.normal());
  b.label = rng.bernoulli(0.5) ? Label::fake : Label::genuine;
  return b;
}

// Two token groups and a shifted svd coordinate make the classes separable.
std::vector<FeatureBundle> separable_set(std::size_t n, std::uint64_t seed, const ModelConfig& c) {
  Rng rng(seed);
  std::vector<FeatureBundle> out;
  for (std::size_t i = 0; i < n; ++i) {
    const bool fake = i % 2 == 0;
    FeatureBundle b;
    for (int k = 0; k < 6; ++k) {
      b.text_ids.push_back(static_cast<features::TokenId>(fake ? 1 + rng.below(4) : 5 + rng.below(4)));
      b.mixed_ids.push_back(static_cast<features::TokenId>(fake ? 1 + rng.below(4) : 5 + rng.below(4)));
    }
    b.text_ids.push_back(0);
    b.svd_vec = {(fake ? 1.0 : -1.0) + 0.3 * rng.normal(), rng.normal()};
    b.label = fake ? Label::fake : Label::genuine;
    (void)c;
    out.push_back(std::move(b));
  }
  return out;
}

ModelConfig separable_config() {
  ModelConfig c;
  c.text_vocab = 9;
  c.mixed_vocab = 9;
  c.text_dim = 8;
  c.mixed_dim = 8;
  c.svd_k = 2;
  c.text_hidden = 8;
  c.mixed_hidden = 8;
  c.svd_hidden = 4;
  c.head_hidden = 8;
  return c;
}

}  // namespace

TEST_CASE("init is deterministic and bounded") {
  const auto a = init_params(tiny_config(3));
  const auto b = init_params(tiny_config(3));
  CHECK(a.flat() == b.flat());
  CHECK(a.flat() != init_params(tiny_config(4)).flat());

  ModelConfig wide = tiny_config();
  wide.svd_k = 100;
  wide.sentiment_dim = 0;
  const auto p = init_params(wide);
  for (double x : p.values("svd.weight")) CHECK(std::abs(x) <= 0.1);
  for (double x : p.values("svd.bias")) CHECK(x == 0.0);
  for (const auto& t : p.tensors()) {
    for (double x : p.values(t.name)) CHECK(std::isfinite(x));
  }
  ModelConfig bad = tiny_config();
  bad.text_dim = 0;
  CHECK_THROWS_AS(init_params(bad), ValidationError);
}

TEST_CASE("zero head gives probability one half") {
  auto p = init_params(tiny_config());
  for (auto& x : p.values("out.weight")) x = 0.0;
  FeatureBundle b;
  b.text_ids = {0, 0, 0};
  b.mixed_ids = {0, 0};
  b.svd_vec = {0.0, 0.0};
  b.sentiment_vec = {0.0};
  CHECK(forward(p, b) == 0.5);
}

TEST_CASE("hand-computed forward pass") {
  ModelConfig c;
  c.text_vocab = 3;
  c.mixed_vocab = 3;
  c.text_dim = 2;
  c.mixed_dim = 2;
  c.svd_k = 2;
  c.text_hidden = 1;
  c.mixed_hidden = 1;
  c.svd_hidden = 1;
  c.head_hidden = 0;
  ModelParams p(c);
  const auto set = [&](const char* name, std::vector<double> v) {
    auto dst = p.values(name);
    REQUIRE(dst.size() == v.size());
    std::copy(v.begin(), v.end(), dst.begin());
  };
  set("text.embedding", {9, 9, 1.0, 2.0, 3.0, -1.0});
  set("text.weight", {0.5, 0.25});
  set("text.bias", {0.1});
  set("mixed.embedding", {9, 9, 0.2, 0.4, -2.0, -2.0});
  set("mixed.weight", {1.0, 1.0});
  set("mixed.bias", {0.0});
  set("svd.weight", {2.0, -1.0});
  set("svd.bias", {0.5});
  set("out.weight", {1.0, -3.0, 0.5});
  set("out.bias", {-0.2});

  FeatureBundle b;
  b.text_ids = {1, 2, 0};  // mean (2, 0.5); 0.5·2 + 0.25·0.5 + 0.1 = 1.225
  b.mixed_ids = {1, 0};    // mean (0.2, 0.4); relu(0.6) = 0.6
  b.svd_vec = {0.3, 0.4};  // 0.6 − 0.4 + 0.5 = 0.7
  // logit = 1.225 − 1.8 + 0.35 − 0.2 = −0.425
  const double expected = 1.0 / (1.0 + std::exp(0.425));
  CHECK(std::abs(forward(p, b) - expected) < 1e-12);

  b.mixed_ids = {2};  // relu(−4) = 0; logit = 1.225 + 0.35 − 0.2 = 1.375
  CHECK(std::abs(forward(p, b) - 1.0 / (1.0 + std::exp(-1.375))) < 1e-12);

  // Huge logits are clamped, keeping the output inside (0, 1).
  set("out.bias", {1e6});
  CHECK(forward(p, b) < 1.0);
  set("out.bias", {-1e6});
  CHECK(forward(p, b) > 0.0);
  CHECK(forward(p, b) == doctest::Approx(1.0 / (1.0 + std::exp(30.0))).epsilon(1e-12));

  b.svd_vec = {1.0};
  CHECK_THROWS_AS(forward(p, b), ValidationError);
  b.svd_vec = {1.0, 2.0};
  b.text_ids = {3};
  CHECK_THROWS_AS(forward(p, b), ValidationError);
}

TEST_CASE("loss closed forms and formula oracle") {
  auto p = init_params(tiny_config());
  Rng rng(1);
  std::vector<FeatureBundle> batch;
  for (int i = 0; i < 6; ++i) batch.push_back(random_bundle(rng, p.config()));

  double ref = 0.0;
  for (const auto& b : batch) {
    const double q = std::clamp(forward(p, b), 1e-7, 1.0 - 1e-7);
    ref += *b.label == Label::fake ? -std::log(q) : -std::log(1.0 - q);
  }
  CHECK(loss(p, batch) == doctest::Approx(ref / 6.0).epsilon(1e-14));

  for (auto& x : p.values("out.weight")) x = 0.0;
  CHECK(loss(p, batch) == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  // Confident and correct: logit saturates at ±30.
  for (auto& b : batch) b.label = Label::fake;
  p.values("out.bias")[0] = 100.0;
  CHECK(loss(p, batch) <= 1e-6);

  CHECK_THROWS_AS(loss(p, std::span<const FeatureBundle>()), ValidationError);
  batch[0].label.reset();
  CHECK_THROWS_AS(loss(p, batch), ValidationError);
}

TEST_CASE("gradient matches central finite differences") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (std::size_t head : {std::size_t{3}, std::size_t{0}}) {
      ModelConfig c = tiny_config(seed);
      c.head_hidden = head;
      if (seed == 5) c.external_text_dim = 3;
      auto p = init_params(c);
      // Nonzero biases so relu units sit away from their kinks.
      Rng rng(seed * 100);
      for (const auto& t : p.tensors()) {
        if (t.is_bias) {
          for (auto& x : p.values(t.name)) x = rng.uniform(-0.5, 0.5);
        }
      }
      std::vector<FeatureBundle> batch;
      for (int i = 0; i < 4; ++i) batch.push_back(random_bundle(rng, c));
      const auto g = grad(p, batch);
      REQUIRE(g.size() == p.flat().size());
      const double h = 1e-6;
      double worst = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double saved = p.flat()[i];
        p.flat()[i] = saved + h;
        const double up = loss(p, batch);
        p.flat()[i] = saved - h;
        const double down = loss(p, batch);
        p.flat()[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double scale = std::max(std::abs(numeric), std::abs(g[i]));
        // Below 1e-6 the difference quotient is dominated by rounding.
        const double err = scale > 1e-6 ? std::abs(numeric - g[i]) / scale : std::abs(numeric - g[i]);
        worst = std::max(worst, err);
      }
      CHECK(worst < 1e-4);
      bool any = false;
      for (double x : g) any = any || x != 0.0;
      CHECK(any);
    }
  }
}

TEST_CASE("padding-only samples leave embeddings untouched") {
  const auto p = init_params(tiny_config());
  Rng rng(2);
  auto b = random_bundle(rng, p.config());
  b.text_ids.assign(5, 0);
  b.mixed_ids.assign(5, 0);
  const auto g = grad(p, std::span<const FeatureBundle>(&b, 1));
  for (const char* table : {"text.embedding", "mixed.embedding"}) {
    const auto& t = p.tensor(table);
    for (std::size_t i = 0; i < t.rows * t.cols; ++i) CHECK(g[t.offset + i] == 0.0);
  }
}

TEST_CASE("training: zero epochs, determinism, separable data") {
  const auto c = separable_config();
  const auto data = separable_set(200, 7, c);
  const auto p0 = init_params(c);

  TrainConfig none;
  none.epochs = 0;
  CHECK(train(p0, data, none).params.flat() == p0.flat());

  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.learning_rate = 1e-2;
  int calls = 0;
  const auto r1 = train(p0, data, cfg, [&](int, double) { ++calls; });
  const auto r2 = train(p0, data, cfg);
  CHECK(calls == 50);
  CHECK(r1.epoch_loss == r2.epoch_loss);
  CHECK(r1.params.flat() == r2.params.flat());
  REQUIRE(r1.epoch_loss.size() == 50);
  for (int e = 1; e < 10; ++e) CHECK(r1.epoch_loss[e] < r1.epoch_loss[e - 1]);
  for (int e = 1; e < 50; ++e) CHECK(r1.epoch_loss[e] <= r1.epoch_loss[e - 1]);
  CHECK(r1.epoch_loss.back() < 0.1);
  CHECK(evaluate(r1.params, data).f1 == 1.0);

  TrainConfig sgd = cfg;
  sgd.optimizer = Optimizer::sgd;
  sgd.learning_rate = 0.5;
  const auto r3 = train(p0, data, sgd);
  CHECK(r3.epoch_loss.back() < r3.epoch_loss.front());

  TrainConfig bad = cfg;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(train(p0, data, bad), ValidationError);
}

TEST_CASE("training reports divergence with its epoch") {
  const auto c = separable_config();
  auto data = separable_set(20, 1, c);
  data[3].svd_vec[0] = std::numeric_limits<double>::infinity();
  TrainConfig cfg;
  cfg.epochs = 3;
  try {
    train(init_params(c), data, cfg);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.epoch() == 1);
  }
}

TEST_CASE("metrics") {
  const std::vector<int> y{1, 0, 1, 0, 1};
  const auto perfect = metrics_from_predictions(y, y);
  CHECK(perfect.f1 == 1.0);
  CHECK(perfect.accuracy == 1.0);

  const std::vector<int> pred{1, 1, 0};
  const std::vector<int> act{1, 0, 1};
  const auto m = metrics_from_predictions(pred, act);
  CHECK(m.precision == 0.5);
  CHECK(m.recall == 0.5);
  CHECK(m.f1 == 0.5);

  Rng rng(12);
  std::vector<int> rp, ra;
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (int i = 0; i < 300; ++i) {
    rp.push_back(rng.bernoulli(0.4));
    ra.push_back(rng.bernoulli(0.3));
    tp += rp.back() && ra.back();
    fp += rp.back() && !ra.back();
    tn += !rp.back() && !ra.back();
    fn += !rp.back() && ra.back();
  }
  const auto r = metrics_from_predictions(rp, ra);
  CHECK(r.tp == tp);
  CHECK(r.fp == fp);
  CHECK(r.tn == tn);
  CHECK(r.fn == fn);
  CHECK(r.accuracy == doctest::Approx(static_cast<double>(tp + tn) / 300.0));
  CHECK(r.f1 == doctest::Approx(2 * r.precision * r.recall / (r.precision + r.recall)));

  const auto none = metrics_from_predictions(std::vector<int>{0, 0}, std::vector<int>{0, 0});
  CHECK(none.f1 == 0.0);
  CHECK(none.accuracy == 1.0);
  CHECK_THROWS_AS(metrics_from_predictions(std::vector<int>{}, std::vector<int>{}), ValidationError);
  CHECK_THROWS_AS(evaluate(init_params(tiny_config()), std::span<const FeatureBundle>()), ValidationError);
}

TEST_CASE("params round-trip through json") {
  const auto p = init_params(tiny_config(9));
  const auto j = params_to_json(p);
  const auto back = params_from_json(nlohmann::json::parse(j.dump()));
  CHECK(back.config() == p.config());
  CHECK(back.flat() == p.flat());
  auto broken = j;
  broken["tensors"]["out.bias"] = nlohmann::json::array({1.0, 2.0});
  CHECK_THROWS_AS(params_from_json(broken), ParseError);
  broken = j;
  broken["version"] = 2;
  CHECK_THROWS_AS(params_from_json(broken), ParseError);
}
