#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "disinfo/features.hpp"

namespace disinfo::classifier {

using features::FeatureBundle;

// Three subnetworks concatenated into a dense head with one logit:
//   text:  mean of E_text over nonzero text ids -> dense+relu (text_hidden)
//   mixed: mean of E_mixed over nonzero mixed ids -> dense+relu (mixed_hidden)
//   svd:   [svd_vec; sentiment_vec] -> dense+relu (svd_hidden)
// When external_text_dim > 0 the text subnet reads the bundle's precomputed
// text_vec instead of averaging embeddings.
struct ModelConfig {
  std::size_t text_vocab = 1;
  std::size_t mixed_vocab = 1;
  std::size_t text_dim = 32;
  std::size_t mixed_dim = 32;
  std::size_t svd_k = 1;
  std::size_t sentiment_dim = 0;
  std::size_t external_text_dim = 0;
  std::size_t text_hidden = 32;
  std::size_t mixed_hidden = 32;
  std::size_t svd_hidden = 16;
  std::size_t head_hidden = 16;  // 0 makes the head a single linear layer
  std::uint64_t seed = 1;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TensorSpec {
  std::string name;
  std::size_t rows;
  std::size_t cols;
  std::size_t offset;
  bool is_bias;
  std::size_t fan_in;
};

// All parameters in one flat vector; a gradient is a vector of the same
// length.
class ModelParams {
 public:
  explicit ModelParams(const ModelConfig& config);

  const ModelConfig& config() const noexcept { return config_; }
  const std::vector<TensorSpec>& tensors() const noexcept { return tensors_; }
  const TensorSpec& tensor(const std::string& name) const;
  std::span<double> values(const std::string& name);
  std::span<const double> values(const std::string& name) const;
  std::vector<double>& flat() noexcept { return flat_; }
  const std::vector<double>& flat() const noexcept { return flat_; }

 private:
  ModelConfig config_;
  std::vector<TensorSpec> tensors_;
  std::vector<double> flat_;
};

// Uniform(±1/√fan_in) weights and embeddings, zero biases.
ModelParams init_params(const ModelConfig& config);

// Throws ValidationError on a shape mismatch.
double forward(const ModelParams& params, const FeatureBundle& bundle);

// Mean binary cross-entropy, probabilities clipped to [1e-7, 1 − 1e-7].
// Throws ValidationError on an empty batch or a missing label.
double loss(const ModelParams& params, std::span<const FeatureBundle> batch);
double loss(const ModelParams& params, std::span<const FeatureBundle* const> batch);

// Gradient of loss() with respect to the flat parameter vector.
std::vector<double> grad(const ModelParams& params, std::span<const FeatureBundle> batch);
std::vector<double> grad(const ModelParams& params, std::span<const FeatureBundle* const> batch);

enum class Optimizer { sgd, adam };

struct TrainConfig {
  Optimizer optimizer = Optimizer::adam;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  int epochs = 20;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 1;

  void validate() const;
};

Optimizer parse_optimizer(const std::string& s);
std::string to_string(Optimizer o);

struct TrainResult {
  ModelParams params;
  std::vector<double> epoch_loss;  // mean per-sample loss, one entry per epoch
};

// Called after each epoch with (epoch, mean loss).
using EpochCallback = std::function<void(int, double)>;

// Mini-batch training with a per-epoch shuffle drawn from config.seed.
// Throws DivergenceError when the loss stops being finite.
TrainResult train(ModelParams params, std::span<const FeatureBundle> data, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

struct Metrics {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
};

// Positive class is fake. Throws ValidationError on an empty set.
Metrics evaluate(const ModelParams& params, std::span<const FeatureBundle> data, double threshold = 0.5);
Metrics metrics_from_predictions(std::span<const int> predicted, std::span<const int> actual);

nlohmann::json metrics_to_json(const Metrics& m);

nlohmann::json config_to_json(const ModelConfig& c);
ModelConfig config_from_json(const nlohmann::json& j);

// Versioned document holding the config and every tensor.
nlohmann::json params_to_json(const ModelParams& p);
ModelParams params_from_json(const nlohmann::json& j);

}  // namespace disinfo::classifier
