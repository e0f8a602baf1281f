#include "envlabel/focal_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "envlabel/random.hpp"
#include "envlabel/simd/kernels.hpp"

namespace envlabel::focal {

ClassCounts taxonomy_class_counts() {
  ClassCounts counts{};
  for (Category c : kCategories) counts[static_cast<std::size_t>(c)] = class_count(c);
  return counts;
}

// ---------------------------------------------------------------------------
// Softmax and loss

void softmax(std::span<const double> logits, std::span<double> out) {
  if (logits.empty()) return;
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  for (double& v : out.first(logits.size())) v /= sum;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  softmax(logits, out);
  return out;
}

double focal_loss(std::span<const double> probs, std::size_t target, double gamma, double alpha,
                  FocalDiagnostics* diagnostics) {
  double p = probs[target];
  if (p < kProbabilityFloor) {
    p = kProbabilityFloor;
    if (diagnostics != nullptr) ++diagnostics->clamped;
  }
  if (p >= 1.0) return 0.0;
  const double modulation = gamma == 0.0 ? 1.0 : std::pow(1.0 - p, gamma);
  return -alpha * modulation * std::log(p);
}

void focal_loss_logit_gradient(std::span<const double> probs, std::size_t target, double gamma, double alpha,
                               std::span<double> grad) {
  const double p = std::max(probs[target], kProbabilityFloor);
  const double q = 1.0 - p;
  // dL/dz_j = alpha * [gamma (1-p)^(gamma-1) p log p - (1-p)^gamma] * (delta_tj - p_j)
  const double focus = (gamma > 0.0 && q > 0.0) ? gamma * std::pow(q, gamma - 1.0) * p * std::log(p) : 0.0;
  const double modulation = gamma == 0.0 ? 1.0 : std::pow(q, gamma);
  const double scale = alpha * (focus - modulation);
  for (std::size_t j = 0; j < probs.size(); ++j) {
    const double indicator = j == target ? 1.0 : 0.0;
    grad[j] = scale * (indicator - probs[j]);
  }
}

FocalLossParams FocalLossParams::uniform(const ClassCounts& counts, double gamma) {
  FocalLossParams p;
  p.gamma = gamma;
  for (std::size_t h = 0; h < kHeads; ++h) p.class_weights[h].assign(counts[h], 1.0);
  return p;
}

void FocalLossParams::check(const ClassCounts& counts) const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("focal loss: gamma must be >= 0");
  for (std::size_t h = 0; h < kHeads; ++h) {
    if (class_weights[h].size() != counts[h]) {
      throw std::invalid_argument("focal loss: head " + std::to_string(h) + " has " +
                                  std::to_string(class_weights[h].size()) + " class weights for " +
                                  std::to_string(counts[h]) + " classes");
    }
    for (double w : class_weights[h]) {
      if (!(w > 0.0) || !std::isfinite(w)) throw std::invalid_argument("focal loss: class weights must be > 0");
    }
  }
}

FocalLossParams inverse_frequency_weights(std::span<const SyntheticSample> dataset, const ClassCounts& counts,
                                          double gamma) {
  FocalLossParams p;
  p.gamma = gamma;
  for (std::size_t h = 0; h < kHeads; ++h) {
    std::vector<double> freq(counts[h], 0.0);
    for (const auto& s : dataset) {
      if (s.targets[h] < counts[h]) freq[s.targets[h]] += 1.0;
    }
    std::vector<double> w(counts[h]);
    for (std::size_t k = 0; k < counts[h]; ++k) w[k] = 1.0 / std::max(freq[k], 1.0);
    const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
    for (double& v : w) v /= mean;
    p.class_weights[h] = std::move(w);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Model

void ToyModelConfig::check() const {
  if (input_dim < 1 || head_hidden < 1) throw std::invalid_argument("toy model: dimensions must be >= 1");
  for (auto w : trunk_widths) {
    if (w < 1) throw std::invalid_argument("toy model: trunk widths must be >= 1");
  }
  for (auto c : class_counts) {
    if (c < 1) throw std::invalid_argument("toy model: class counts must be >= 1");
  }
  if (batch_size < 1) throw std::invalid_argument("toy model: batch size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("toy model: learning rate must be finite and >= 0");
  }
}

namespace {

DenseLayer make_layer(std::size_t in, std::size_t out) {
  return DenseLayer{in, out, std::vector<double>(in * out, 0.0), std::vector<double>(out, 0.0)};
}

void fill_uniform(DenseLayer& layer, double limit, Rng& rng) {
  for (double& w : layer.weights) w = rng.uniform(-limit, limit);
}

// y = W x + b
void dense_forward(const DenseLayer& layer, std::span<const double> x, std::span<double> y) {
  for (std::size_t o = 0; o < layer.out; ++o) {
    y[o] = simd::dot({layer.weights.data() + o * layer.in, layer.in}, x) + layer.bias[o];
  }
}

// Accumulates dW += g x^T, db += g and, if dx is non-empty, dx += W^T g.
void dense_backward(const DenseLayer& layer, std::span<const double> x, std::span<const double> g,
                    DenseLayer& grad, std::span<double> dx) {
  for (std::size_t o = 0; o < layer.out; ++o) {
    if (g[o] == 0.0) continue;
    simd::axpy(g[o], x, {grad.weights.data() + o * layer.in, layer.in});
    grad.bias[o] += g[o];
    if (!dx.empty()) simd::axpy(g[o], {layer.weights.data() + o * layer.in, layer.in}, dx);
  }
}

void relu(std::span<double> v) {
  for (double& x : v) x = x > 0.0 ? x : 0.0;
}

struct Activations {
  std::vector<std::vector<double>> trunk;  // post-ReLU output of each trunk layer
  std::array<std::vector<double>, kHeads> hidden;
  HeadValues logits;
};

std::span<const double> trunk_output(const Activations& act, std::span<const double> features) {
  return act.trunk.empty() ? features : std::span<const double>(act.trunk.back());
}

void run_forward(const ToyModel& m, std::span<const double> features, Activations& act) {
  act.trunk.resize(m.trunk.size());
  std::span<const double> x = features;
  for (std::size_t l = 0; l < m.trunk.size(); ++l) {
    act.trunk[l].resize(m.trunk[l].out);
    dense_forward(m.trunk[l], x, act.trunk[l]);
    relu(act.trunk[l]);
    x = act.trunk[l];
  }
  for (std::size_t h = 0; h < kHeads; ++h) {
    const auto& [hidden, logits] = m.heads[h];
    act.hidden[h].resize(hidden.out);
    dense_forward(hidden, x, act.hidden[h]);
    relu(act.hidden[h]);
    act.logits[h].resize(logits.out);
    dense_forward(logits, act.hidden[h], act.logits[h]);
  }
}

void check_features(const ToyModel& m, std::span<const double> features) {
  if (features.size() != m.config.input_dim) {
    throw std::invalid_argument("toy model: expected " + std::to_string(m.config.input_dim) +
                                " features, got " + std::to_string(features.size()));
  }
}

void check_sample(const ToyModel& m, const SyntheticSample& s) {
  check_features(m, s.features);
  for (std::size_t h = 0; h < kHeads; ++h) {
    if (s.targets[h] >= m.config.class_counts[h]) {
      throw std::invalid_argument("toy model: target " + std::to_string(s.targets[h]) + " out of range for head " +
                                  std::to_string(h));
    }
  }
}

}  // namespace

ToyModel ToyModel::zeros(const ToyModelConfig& config) {
  config.check();
  ToyModel m;
  m.config = config;
  std::size_t in = config.input_dim;
  for (auto w : config.trunk_widths) {
    m.trunk.push_back(make_layer(in, w));
    in = w;
  }
  for (std::size_t h = 0; h < kHeads; ++h) {
    m.heads[h][0] = make_layer(in, config.head_hidden);
    m.heads[h][1] = make_layer(config.head_hidden, config.class_counts[h]);
  }
  return m;
}

ToyModel ToyModel::initialize(const ToyModelConfig& config) {
  ToyModel m = zeros(config);
  Rng rng(config.seed);
  for (auto& layer : m.trunk) fill_uniform(layer, std::sqrt(6.0 / static_cast<double>(layer.in)), rng);
  for (auto& head : m.heads) {
    fill_uniform(head[0], std::sqrt(6.0 / static_cast<double>(head[0].in)), rng);
    fill_uniform(head[1], std::sqrt(6.0 / static_cast<double>(head[1].in + head[1].out)), rng);
  }
  return m;
}

std::vector<std::span<double>> ToyModel::parameters() {
  std::vector<std::span<double>> out;
  for (auto& l : trunk) {
    out.emplace_back(l.weights);
    out.emplace_back(l.bias);
  }
  for (auto& head : heads) {
    for (auto& l : head) {
      out.emplace_back(l.weights);
      out.emplace_back(l.bias);
    }
  }
  return out;
}

std::vector<std::span<const double>> ToyModel::parameters() const {
  std::vector<std::span<const double>> out;
  for (auto block : const_cast<ToyModel*>(this)->parameters()) out.emplace_back(block);
  return out;
}

std::vector<std::string> ToyModel::parameter_names() const {
  std::vector<std::string> out;
  for (std::size_t l = 0; l < trunk.size(); ++l) {
    out.push_back("trunk." + std::to_string(l) + ".weight");
    out.push_back("trunk." + std::to_string(l) + ".bias");
  }
  for (Category c : kCategories) {
    const std::string key(category_key(c));
    for (int l = 0; l < 2; ++l) {
      out.push_back("head." + key + "." + std::to_string(l) + ".weight");
      out.push_back("head." + key + "." + std::to_string(l) + ".bias");
    }
  }
  return out;
}

std::size_t ToyModel::parameter_count() const {
  std::size_t n = 0;
  for (auto block : parameters()) n += block.size();
  return n;
}

bool ToyModel::all_finite() const {
  for (auto block : parameters()) {
    for (double v : block) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Loss and gradient

HeadValues forward(const ToyModel& model, std::span<const double> features) {
  check_features(model, features);
  Activations act;
  run_forward(model, features, act);
  return act.logits;
}

double total_loss(const HeadValues& probs, const std::array<std::size_t, kHeads>& targets,
                  const FocalLossParams& params, FocalDiagnostics* diagnostics) {
  double total = 0.0;
  for (std::size_t h = 0; h < kHeads; ++h) {
    const double alpha = params.class_weights[h].at(targets[h]);
    total += focal_loss(probs[h], targets[h], params.gamma, alpha, diagnostics);
  }
  return total;
}

double batch_loss(const ToyModel& model, std::span<const SyntheticSample> batch, const FocalLossParams& params) {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  Activations act;
  HeadValues probs;
  double sum = 0.0;
  for (const auto& s : batch) {
    check_sample(model, s);
    run_forward(model, s.features, act);
    for (std::size_t h = 0; h < kHeads; ++h) probs[h] = softmax(act.logits[h]);
    sum += total_loss(probs, s.targets, params);
  }
  return sum / static_cast<double>(batch.size());
}

LossGradient loss_gradient(const ToyModel& model, std::span<const SyntheticSample> batch,
                           const FocalLossParams& params) {
  if (batch.empty()) throw std::invalid_argument("loss_gradient: empty batch");
  params.check(model.config.class_counts);
  LossGradient out{0.0, ToyModel::zeros(model.config)};
  ToyModel& grad = out.gradient;
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  Activations act;
  HeadValues probs;
  std::vector<double> dlogits;
  std::vector<double> dhidden;
  std::vector<double> dshared;
  std::vector<std::vector<double>> dtrunk(model.trunk.size());

  for (const auto& s : batch) {
    check_sample(model, s);
    run_forward(model, s.features, act);
    const std::span<const double> shared = trunk_output(act, s.features);
    dshared.assign(shared.size(), 0.0);

    for (std::size_t h = 0; h < kHeads; ++h) {
      probs[h] = softmax(act.logits[h]);
      const double alpha = params.class_weights[h][s.targets[h]];
      dlogits.resize(probs[h].size());
      focal_loss_logit_gradient(probs[h], s.targets[h], params.gamma, alpha, dlogits);
      for (double& g : dlogits) g *= inv_n;

      const auto& [hidden, logits] = model.heads[h];
      dhidden.assign(hidden.out, 0.0);
      dense_backward(logits, act.hidden[h], dlogits, grad.heads[h][1], dhidden);
      for (std::size_t k = 0; k < hidden.out; ++k) {
        if (act.hidden[h][k] <= 0.0) dhidden[k] = 0.0;
      }
      dense_backward(hidden, shared, dhidden, grad.heads[h][0], model.trunk.empty() ? std::span<double>{} : std::span<double>(dshared));
    }
    out.loss += total_loss(probs, s.targets, params) * inv_n;

    // Trunk, last layer first.
    std::span<const double> upstream = dshared;
    for (std::size_t l = model.trunk.size(); l-- > 0;) {
      auto& g = dtrunk[l];
      g.assign(upstream.begin(), upstream.end());
      for (std::size_t k = 0; k < g.size(); ++k) {
        if (act.trunk[l][k] <= 0.0) g[k] = 0.0;
      }
      const std::span<const double> input = l == 0 ? std::span<const double>(s.features) : act.trunk[l - 1];
      std::vector<double> dinput;
      if (l > 0) dinput.assign(model.trunk[l].in, 0.0);
      dense_backward(model.trunk[l], input, g, grad.trunk[l], dinput);
      if (l > 0) {
        dtrunk[l - 1] = std::move(dinput);
        upstream = dtrunk[l - 1];
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

TrainResult train(std::span<const SyntheticSample> dataset, const ToyModelConfig& config,
                  const FocalLossParams& params) {
  config.check();
  params.check(config.class_counts);
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");

  TrainResult result{ToyModel::initialize(config), {}};
  ToyModel& model = result.model;
  for (const auto& s : dataset) check_sample(model, s);

  Rng rng(config.seed ^ 0x9E3779B97F4A7C15ull);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<SyntheticSample> batch;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double epoch_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(dataset[order[i]]);
      const LossGradient lg = loss_gradient(model, batch, params);
      if (!std::isfinite(lg.loss)) {
        throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) + ", batch starting at " +
                               std::to_string(start) + ": loss " + std::to_string(lg.loss));
      }
      epoch_sum += lg.loss * static_cast<double>(end - start);

      auto params_out = model.parameters();
      const auto grads = lg.gradient.parameters();
      for (std::size_t b = 0; b < params_out.size(); ++b) simd::axpy(-config.learning_rate, grads[b], params_out[b]);
    }
    if (!model.all_finite()) {
      throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) + ": non-finite parameters");
    }
    result.epoch_loss.push_back(epoch_sum / static_cast<double>(dataset.size()));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Prediction

Prediction predict(const ToyModel& model, std::span<const double> features) {
  check_features(model, features);
  Activations act;
  run_forward(model, features, act);
  Prediction p;
  for (std::size_t h = 0; h < kHeads; ++h) {
    p.scores[h] = softmax(act.logits[h]);
    p.classes[h] = static_cast<std::size_t>(std::max_element(p.scores[h].begin(), p.scores[h].end()) -
                                            p.scores[h].begin());
  }
  if (model.config.class_counts == taxonomy_class_counts()) {
    EnvironmentLabel label;
    for (Category c : kCategories) assign_class(label, c, p.classes[static_cast<std::size_t>(c)]);
    p.label = label;
  }
  return p;
}

std::array<double, kHeads> per_head_accuracy(const ToyModel& model, std::span<const SyntheticSample> data) {
  std::array<double, kHeads> acc{};
  if (data.empty()) return acc;
  for (const auto& s : data) {
    const Prediction p = predict(model, s.features);
    for (std::size_t h = 0; h < kHeads; ++h) acc[h] += p.classes[h] == s.targets[h] ? 1.0 : 0.0;
  }
  for (double& a : acc) a /= static_cast<double>(data.size());
  return acc;
}

}  // namespace envlabel::focal
