#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "envlabel/label_model.hpp"

// Desk-scale multi-head classifier: a shared fully-connected trunk feeding one
// two-layer head per taxonomy category, trained with the sum of per-category
// multi-class focal losses. Synthetic feature vectors stand in for image
// backbone features.
namespace envlabel::focal {

inline constexpr std::size_t kHeads = kCategoryCount;
inline constexpr double kProbabilityFloor = 1e-12;

using ClassCounts = std::array<std::size_t, kHeads>;

/// Class counts of the label taxonomy, in category order (3, 5, 3, 4, 4, 4).
ClassCounts taxonomy_class_counts();

/// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> logits);
void softmax(std::span<const double> logits, std::span<double> out);

struct FocalDiagnostics {
  std::size_t clamped = 0;  // evaluations where p_t fell below kProbabilityFloor
};

/// -alpha * (1 - p_t)^gamma * log(p_t), p_t = probs[target] floored at
/// kProbabilityFloor.
double focal_loss(std::span<const double> probs, std::size_t target, double gamma, double alpha,
                  FocalDiagnostics* diagnostics = nullptr);

/// Gradient of focal_loss with respect to the logits that produced `probs`.
void focal_loss_logit_gradient(std::span<const double> probs, std::size_t target, double gamma, double alpha,
                               std::span<double> grad);

struct FocalLossParams {
  double gamma = 2.0;
  /// Per head, one weight per class; the target class's weight scales the term.
  std::array<std::vector<double>, kHeads> class_weights;

  static FocalLossParams uniform(const ClassCounts& counts, double gamma = 2.0);
  /// Throws std::invalid_argument on negative gamma, non-positive weights or
  /// weight vectors that do not match `counts`.
  void check(const ClassCounts& counts) const;
};

struct ToyModelConfig {
  std::size_t input_dim = 16;
  std::vector<std::size_t> trunk_widths = {32};
  std::size_t head_hidden = 16;
  ClassCounts class_counts = taxonomy_class_counts();
  double learning_rate = 0.1;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;

  void check() const;
  bool operator==(const ToyModelConfig&) const = default;
};

/// Fully-connected layer; weights are row-major, out x in.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  bool operator==(const DenseLayer&) const = default;
};

struct ToyModel {
  ToyModelConfig config;
  std::vector<DenseLayer> trunk;                        // ReLU after every layer
  std::array<std::array<DenseLayer, 2>, kHeads> heads;  // hidden (ReLU), logits

  /// He-uniform hidden layers, Glorot-uniform logit layers, zero biases,
  /// drawn from config.seed.
  static ToyModel initialize(const ToyModelConfig& config);
  static ToyModel zeros(const ToyModelConfig& config);

  /// Parameter blocks in a fixed order (trunk layers, then heads; weights
  /// before bias) with matching names such as "trunk.0.weight".
  std::vector<std::span<double>> parameters();
  std::vector<std::span<const double>> parameters() const;
  std::vector<std::string> parameter_names() const;
  std::size_t parameter_count() const;
  bool all_finite() const;

  bool operator==(const ToyModel&) const = default;
};

struct SyntheticSample {
  std::vector<double> features;
  std::array<std::size_t, kHeads> targets{};

  bool operator==(const SyntheticSample&) const = default;
};

using HeadValues = std::array<std::vector<double>, kHeads>;

/// Per-head logits.
HeadValues forward(const ToyModel& model, std::span<const double> features);

/// Sum over heads of focal_loss(probs[c], targets[c], gamma, alpha_c[targets[c]]).
double total_loss(const HeadValues& probs, const std::array<std::size_t, kHeads>& targets,
                  const FocalLossParams& params, FocalDiagnostics* diagnostics = nullptr);

/// Mean total loss over a batch.
double batch_loss(const ToyModel& model, std::span<const SyntheticSample> batch, const FocalLossParams& params);

struct LossGradient {
  double loss = 0.0;  // mean total loss over the batch
  ToyModel gradient;  // same shape as the model
};

/// Backpropagated gradient of the mean total loss over `batch`.
LossGradient loss_gradient(const ToyModel& model, std::span<const SyntheticSample> batch,
                           const FocalLossParams& params);

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  ToyModel model;
  std::vector<double> epoch_loss;  // mean training loss per epoch
};

/// Mini-batch gradient descent, deterministic given config.seed. Throws
/// std::invalid_argument on an empty or ill-shaped dataset and
/// TrainingDiverged when the loss stops being finite.
TrainResult train(std::span<const SyntheticSample> dataset, const ToyModelConfig& config,
                  const FocalLossParams& params);

/// Class weights proportional to inverse class frequency, normalized to mean
/// 1 per head. Classes absent from the data are counted once.
FocalLossParams inverse_frequency_weights(std::span<const SyntheticSample> dataset, const ClassCounts& counts,
                                          double gamma = 2.0);

struct Prediction {
  std::array<std::size_t, kHeads> classes{};
  HeadValues scores;  // softmax probabilities per head
  /// Set when the model's class counts match the label taxonomy.
  std::optional<EnvironmentLabel> label;
};

/// Throws std::invalid_argument if the feature length differs from input_dim.
Prediction predict(const ToyModel& model, std::span<const double> features);

/// Fraction of samples whose argmax matches the target, per head.
std::array<double, kHeads> per_head_accuracy(const ToyModel& model, std::span<const SyntheticSample> data);

}  // namespace envlabel::focal
