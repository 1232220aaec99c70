#include "disinfo/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <nlohmann/json.hpp>

#include "disinfo/error.hpp"
#include "disinfo/rng.hpp"

namespace disinfo::classifier {

using nlohmann::json;

namespace {
constexpr double kLogitClamp = 30.0;
constexpr double kProbClip = 1e-7;
constexpr int kFormatVersion = 1;
}  // namespace

void ModelConfig::validate() const {
  const auto positive = [](std::size_t v, const char* name) {
    if (v < 1) throw ValidationError(std::string("model ") + name + " must be at least 1");
  };
  positive(text_vocab, "text_vocab");
  positive(mixed_vocab, "mixed_vocab");
  positive(text_dim, "text_dim");
  positive(mixed_dim, "mixed_dim");
  positive(svd_k, "svd_k");
  positive(text_hidden, "text_hidden");
  positive(mixed_hidden, "mixed_hidden");
  positive(svd_hidden, "svd_hidden");
}

ModelParams::ModelParams(const ModelConfig& c) : config_(c) {
  c.validate();
  std::size_t offset = 0;
  const auto add = [&](std::string name, std::size_t rows, std::size_t cols, bool bias, std::size_t fan_in) {
    tensors_.push_back({std::move(name), rows, cols, offset, bias, fan_in});
    offset += rows * cols;
  };
  const auto dense = [&](const std::string& prefix, std::size_t out, std::size_t in) {
    add(prefix + ".weight", out, in, false, in);
    add(prefix + ".bias", out, 1, true, in);
  };
  std::size_t text_in = c.external_text_dim;
  if (text_in == 0) {
    add("text.embedding", c.text_vocab, c.text_dim, false, c.text_dim);
    text_in = c.text_dim;
  }
  dense("text", c.text_hidden, text_in);
  add("mixed.embedding", c.mixed_vocab, c.mixed_dim, false, c.mixed_dim);
  dense("mixed", c.mixed_hidden, c.mixed_dim);
  dense("svd", c.svd_hidden, c.svd_k + c.sentiment_dim);
  const std::size_t concat = c.text_hidden + c.mixed_hidden + c.svd_hidden;
  if (c.head_hidden > 0) {
    dense("head", c.head_hidden, concat);
    dense("out", 1, c.head_hidden);
  } else {
    dense("out", 1, concat);
  }
  flat_.assign(offset, 0.0);
}

const TensorSpec& ModelParams::tensor(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t;
  }
  throw ValidationError("no tensor named " + name);
}

std::span<double> ModelParams::values(const std::string& name) {
  const auto& t = tensor(name);
  return {flat_.data() + t.offset, t.rows * t.cols};
}

std::span<const double> ModelParams::values(const std::string& name) const {
  const auto& t = tensor(name);
  return {flat_.data() + t.offset, t.rows * t.cols};
}

ModelParams init_params(const ModelConfig& config) {
  ModelParams p(config);
  Rng rng(config.seed);
  for (const auto& t : p.tensors()) {
    if (t.is_bias) continue;
    const double bound = 1.0 / std::sqrt(static_cast<double>(t.fan_in));
    for (auto& x : p.values(t.name)) x = rng.uniform(-bound, bound);
  }
  return p;
}

namespace {

struct Dense {
  const double* w;
  const double* b;
  std::size_t out;
  std::size_t in;
};

Dense dense_of(const ModelParams& p, const std::string& prefix) {
  const auto& w = p.tensor(prefix + ".weight");
  return {p.flat().data() + w.offset, p.flat().data() + p.tensor(prefix + ".bias").offset, w.rows, w.cols};
}

void apply(const Dense& d, const std::vector<double>& x, std::vector<double>& y, bool relu) {
  y.assign(d.out, 0.0);
  for (std::size_t o = 0; o < d.out; ++o) {
    double s = d.b[o];
    const double* row = d.w + o * d.in;
    for (std::size_t i = 0; i < d.in; ++i) s += row[i] * x[i];
    y[o] = relu ? std::max(0.0, s) : s;
  }
}

// Backprop through y = act(W x + b) given dL/dy; accumulates into g and
// returns dL/dx when wanted.
void backprop(const Dense& d, std::size_t w_off, std::size_t b_off, const std::vector<double>& x,
              const std::vector<double>& y, const std::vector<double>& dy, bool relu, std::vector<double>& g,
              std::vector<double>* dx) {
  if (dx) dx->assign(d.in, 0.0);
  for (std::size_t o = 0; o < d.out; ++o) {
    const double delta = relu && y[o] <= 0.0 ? 0.0 : dy[o];
    if (delta == 0.0) continue;
    g[b_off + o] += delta;
    double* grow = g.data() + w_off + o * d.in;
    const double* row = d.w + o * d.in;
    for (std::size_t i = 0; i < d.in; ++i) {
      grow[i] += delta * x[i];
      if (dx) (*dx)[i] += delta * row[i];
    }
  }
}

struct Pooled {
  std::vector<double> mean;
  std::vector<std::uint32_t> ids;  // nonzero ids that contributed
};

Pooled average(const ModelParams& p, const std::string& table, std::span<const features::TokenId> ids) {
  const auto& t = p.tensor(table);
  Pooled out;
  out.mean.assign(t.cols, 0.0);
  for (auto id : ids) {
    if (id == 0) continue;
    if (id >= t.rows) throw ValidationError(table + " id " + std::to_string(id) + " exceeds vocabulary size");
    out.ids.push_back(id);
    const double* row = p.flat().data() + t.offset + id * t.cols;
    for (std::size_t k = 0; k < t.cols; ++k) out.mean[k] += row[k];
  }
  if (!out.ids.empty()) {
    for (auto& x : out.mean) x /= static_cast<double>(out.ids.size());
  }
  return out;
}

// Activations of one forward pass, kept for backprop.
struct Trace {
  Pooled text, mixed;
  std::vector<double> text_in, svd_in;
  std::vector<double> h_text, h_mixed, h_svd, concat, h_head;
  double raw_logit = 0.0;
  double logit = 0.0;
  double prob = 0.0;
};

Trace run(const ModelParams& p, const FeatureBundle& b) {
  const auto& c = p.config();
  Trace t;
  if (c.external_text_dim > 0) {
    if (b.text_vec.size() != c.external_text_dim) {
      throw ValidationError("text_vec has length " + std::to_string(b.text_vec.size()) + ", model expects " +
                            std::to_string(c.external_text_dim));
    }
    t.text_in = b.text_vec;
  } else {
    t.text = average(p, "text.embedding", b.text_ids);
    t.text_in = t.text.mean;
  }
  t.mixed = average(p, "mixed.embedding", b.mixed_ids);
  if (b.svd_vec.size() != c.svd_k) {
    throw ValidationError("svd_vec has length " + std::to_string(b.svd_vec.size()) + ", model expects " +
                          std::to_string(c.svd_k));
  }
  if (b.sentiment_vec.size() != c.sentiment_dim) {
    throw ValidationError("sentiment_vec has length " + std::to_string(b.sentiment_vec.size()) +
                          ", model expects " + std::to_string(c.sentiment_dim));
  }
  t.svd_in = b.svd_vec;
  t.svd_in.insert(t.svd_in.end(), b.sentiment_vec.begin(), b.sentiment_vec.end());

  apply(dense_of(p, "text"), t.text_in, t.h_text, true);
  apply(dense_of(p, "mixed"), t.mixed.mean, t.h_mixed, true);
  apply(dense_of(p, "svd"), t.svd_in, t.h_svd, true);
  t.concat = t.h_text;
  t.concat.insert(t.concat.end(), t.h_mixed.begin(), t.h_mixed.end());
  t.concat.insert(t.concat.end(), t.h_svd.begin(), t.h_svd.end());
  std::vector<double> out;
  if (c.head_hidden > 0) {
    apply(dense_of(p, "head"), t.concat, t.h_head, true);
    apply(dense_of(p, "out"), t.h_head, out, false);
  } else {
    apply(dense_of(p, "out"), t.concat, out, false);
  }
  t.raw_logit = out[0];
  t.logit = std::clamp(out[0], -kLogitClamp, kLogitClamp);
  t.prob = 1.0 / (1.0 + std::exp(-t.logit));
  return t;
}

double label_of(const FeatureBundle& b) {
  if (!b.label) throw ValidationError("sample " + b.tweet_id + " has no label");
  return *b.label == Label::fake ? 1.0 : 0.0;
}

double sample_loss(double prob, double y) {
  const double q = std::clamp(prob, kProbClip, 1.0 - kProbClip);
  return -(y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
}

void backward(const ModelParams& p, const FeatureBundle& b, double scale, std::vector<double>& g) {
  const auto& c = p.config();
  const Trace t = run(p, b);
  const double y = label_of(b);
  // d/dlogit of the clipped cross-entropy; zero where the clamp or the clip
  // is active.
  const bool clipped = t.prob < kProbClip || t.prob > 1.0 - kProbClip;
  const bool clamped = std::abs(t.raw_logit) > kLogitClamp;
  if (clipped || clamped) return;
  const std::vector<double> dlogit{(t.prob - y) * scale};

  const auto off = [&](const std::string& name) { return p.tensor(name).offset; };
  std::vector<double> dconcat;
  if (c.head_hidden > 0) {
    std::vector<double> dhead;
    std::vector<double> out{t.raw_logit};
    backprop(dense_of(p, "out"), off("out.weight"), off("out.bias"), t.h_head, out, dlogit, false, g, &dhead);
    backprop(dense_of(p, "head"), off("head.weight"), off("head.bias"), t.concat, t.h_head, dhead, true, g,
             &dconcat);
  } else {
    std::vector<double> out{t.raw_logit};
    backprop(dense_of(p, "out"), off("out.weight"), off("out.bias"), t.concat, out, dlogit, false, g, &dconcat);
  }
  const auto slice = [&](std::size_t from, std::size_t n) {
    return std::vector<double>(dconcat.begin() + static_cast<std::ptrdiff_t>(from),
                               dconcat.begin() + static_cast<std::ptrdiff_t>(from + n));
  };
  const auto d_text = slice(0, c.text_hidden);
  const auto d_mixed = slice(c.text_hidden, c.mixed_hidden);
  const auto d_svd = slice(c.text_hidden + c.mixed_hidden, c.svd_hidden);

  backprop(dense_of(p, "svd"), off("svd.weight"), off("svd.bias"), t.svd_in, t.h_svd, d_svd, true, g, nullptr);

  const auto into_table = [&](const std::string& table, const Pooled& pooled, const std::vector<double>& dmean) {
    if (pooled.ids.empty()) return;
    const auto& spec = p.tensor(table);
    const double share = 1.0 / static_cast<double>(pooled.ids.size());
    for (auto id : pooled.ids) {
      double* row = g.data() + spec.offset + id * spec.cols;
      for (std::size_t k = 0; k < spec.cols; ++k) row[k] += share * dmean[k];
    }
  };
  std::vector<double> dmean;
  backprop(dense_of(p, "mixed"), off("mixed.weight"), off("mixed.bias"), t.mixed.mean, t.h_mixed, d_mixed, true, g,
           &dmean);
  into_table("mixed.embedding", t.mixed, dmean);
  const bool embed_text = c.external_text_dim == 0;
  backprop(dense_of(p, "text"), off("text.weight"), off("text.bias"), t.text_in, t.h_text, d_text, true, g,
           embed_text ? &dmean : nullptr);
  if (embed_text) into_table("text.embedding", t.text, dmean);
}

template <typename Get>
double mean_loss(const ModelParams& p, std::size_t n, Get get) {
  if (n == 0) throw ValidationError("loss of an empty batch");
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& b = get(i);
    s += sample_loss(run(p, b).prob, label_of(b));
  }
  return s / static_cast<double>(n);
}

template <typename Get>
std::vector<double> mean_grad(const ModelParams& p, std::size_t n, Get get) {
  if (n == 0) throw ValidationError("gradient of an empty batch");
  std::vector<double> g(p.flat().size(), 0.0);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) backward(p, get(i), scale, g);
  return g;
}

}  // namespace

double forward(const ModelParams& params, const FeatureBundle& bundle) { return run(params, bundle).prob; }

double loss(const ModelParams& p, std::span<const FeatureBundle> batch) {
  return mean_loss(p, batch.size(), [&](std::size_t i) -> const FeatureBundle& { return batch[i]; });
}
double loss(const ModelParams& p, std::span<const FeatureBundle* const> batch) {
  return mean_loss(p, batch.size(), [&](std::size_t i) -> const FeatureBundle& { return *batch[i]; });
}
std::vector<double> grad(const ModelParams& p, std::span<const FeatureBundle> batch) {
  return mean_grad(p, batch.size(), [&](std::size_t i) -> const FeatureBundle& { return batch[i]; });
}
std::vector<double> grad(const ModelParams& p, std::span<const FeatureBundle* const> batch) {
  return mean_grad(p, batch.size(), [&](std::size_t i) -> const FeatureBundle& { return *batch[i]; });
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ValidationError("learning rate must be positive");
  if (batch_size < 1) throw ValidationError("batch size must be at least 1");
  if (epochs < 0) throw ValidationError("epochs must not be negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ValidationError("adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ValidationError("adam epsilon must be positive");
}

Optimizer parse_optimizer(const std::string& s) {
  if (s == "adam") return Optimizer::adam;
  if (s == "sgd") return Optimizer::sgd;
  throw ValidationError("unknown optimizer '" + s + "' (expected adam or sgd)");
}

std::string to_string(Optimizer o) { return o == Optimizer::adam ? "adam" : "sgd"; }

TrainResult train(ModelParams params, std::span<const FeatureBundle> data, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  TrainResult result{std::move(params), {}};
  if (config.epochs == 0) return result;
  if (data.empty()) throw ValidationError("training set is empty");
  for (const auto& b : data) label_of(b);

  auto& w = result.params.flat();
  std::vector<double> m(w.size(), 0.0), v(w.size(), 0.0);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(config.seed);
  std::uint64_t step = 0;
  std::vector<const FeatureBundle*> batch;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i) {
        batch.push_back(&data[order[i]]);
      }
      const double batch_loss = loss(result.params, std::span<const FeatureBundle* const>(batch));
      if (!std::isfinite(batch_loss)) throw DivergenceError(epoch);
      total += batch_loss * static_cast<double>(batch.size());
      const auto g = grad(result.params, std::span<const FeatureBundle* const>(batch));
      ++step;
      if (config.optimizer == Optimizer::sgd) {
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= config.learning_rate * g[i];
      } else {
        const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
        for (std::size_t i = 0; i < w.size(); ++i) {
          if (g[i] == 0.0 && m[i] == 0.0 && v[i] == 0.0) continue;
          m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
          v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
          w[i] -= config.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + config.epsilon);
        }
      }
    }
    for (double x : w) {
      if (!std::isfinite(x)) throw DivergenceError(epoch);
    }
    const double mean = total / static_cast<double>(data.size());
    if (!std::isfinite(mean)) throw DivergenceError(epoch);
    result.epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  return result;
}

Metrics metrics_from_predictions(std::span<const int> predicted, std::span<const int> actual) {
  if (predicted.empty()) throw ValidationError("metrics of an empty set");
  if (predicted.size() != actual.size()) throw ValidationError("prediction and label counts differ");
  Metrics m;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] && actual[i]) ++m.tp;
    else if (predicted[i]) ++m.fp;
    else if (actual[i]) ++m.fn;
    else ++m.tn;
  }
  const auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  m.precision = ratio(static_cast<double>(m.tp), static_cast<double>(m.tp + m.fp));
  m.recall = ratio(static_cast<double>(m.tp), static_cast<double>(m.tp + m.fn));
  m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
  m.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(predicted.size());
  return m;
}

Metrics evaluate(const ModelParams& params, std::span<const FeatureBundle> data, double threshold) {
  if (data.empty()) throw ValidationError("evaluation set is empty");
  std::vector<int> predicted, actual;
  for (const auto& b : data) {
    actual.push_back(static_cast<int>(label_of(b)));
    predicted.push_back(forward(params, b) >= threshold ? 1 : 0);
  }
  return metrics_from_predictions(predicted, actual);
}

json metrics_to_json(const Metrics& m) {
  return {{"tp", m.tp},
          {"fp", m.fp},
          {"tn", m.tn},
          {"fn", m.fn},
          {"precision", m.precision},
          {"recall", m.recall},
          {"f1", m.f1},
          {"accuracy", m.accuracy}};
}

json config_to_json(const ModelConfig& c) {
  return {{"text_vocab", c.text_vocab},       {"mixed_vocab", c.mixed_vocab},
          {"text_dim", c.text_dim},           {"mixed_dim", c.mixed_dim},
          {"svd_k", c.svd_k},                 {"sentiment_dim", c.sentiment_dim},
          {"external_text_dim", c.external_text_dim}, {"text_hidden", c.text_hidden},
          {"mixed_hidden", c.mixed_hidden},   {"svd_hidden", c.svd_hidden},
          {"head_hidden", c.head_hidden},     {"activation", "relu"},
          {"seed", c.seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.text_vocab = j.at("text_vocab").get<std::size_t>();
  c.mixed_vocab = j.at("mixed_vocab").get<std::size_t>();
  c.text_dim = j.at("text_dim").get<std::size_t>();
  c.mixed_dim = j.at("mixed_dim").get<std::size_t>();
  c.svd_k = j.at("svd_k").get<std::size_t>();
  c.sentiment_dim = j.value("sentiment_dim", std::size_t{0});
  c.external_text_dim = j.value("external_text_dim", std::size_t{0});
  c.text_hidden = j.at("text_hidden").get<std::size_t>();
  c.mixed_hidden = j.at("mixed_hidden").get<std::size_t>();
  c.svd_hidden = j.at("svd_hidden").get<std::size_t>();
  c.head_hidden = j.at("head_hidden").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  if (j.value("activation", "relu") != "relu") throw ParseError("only relu activation is supported", 0);
  c.validate();
  return c;
}

json params_to_json(const ModelParams& p) {
  json tensors = json::object();
  for (const auto& t : p.tensors()) {
    const auto v = p.values(t.name);
    tensors[t.name] = std::vector<double>(v.begin(), v.end());
  }
  return {{"format", "disinfo-model"},
          {"version", kFormatVersion},
          {"config", config_to_json(p.config())},
          {"tensors", std::move(tensors)}};
}

ModelParams params_from_json(const json& j) {
  if (!j.is_object() || j.value("format", "") != "disinfo-model") throw ParseError("not a disinfo-model document", 0);
  if (j.value("version", 0) != kFormatVersion) throw ParseError("unsupported disinfo-model version", 0);
  ModelParams p(config_from_json(j.at("config")));
  const auto& tensors = j.at("tensors");
  for (const auto& t : p.tensors()) {
    const auto& src = tensors.at(t.name);
    auto dst = p.values(t.name);
    if (src.size() != dst.size()) throw ParseError("tensor " + t.name + " has the wrong size", 0);
    for (std::size_t i = 0; i < dst.size(); ++i) {
      dst[i] = src[i].get<double>();
      if (!std::isfinite(dst[i])) throw ParseError("tensor " + t.name + " holds a non-finite value", 0);
    }
  }
  return p;
}

}  // namespace disinfo::classifier
