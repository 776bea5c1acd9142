#include "solarcast/neuralnet.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "solarcast/errors.hpp"

namespace solarcast {

void MLPConfig::validate() const {
  if (input_dim < 1) throw ValidationError("input_dim must be at least 1");
  if (hidden_widths.empty() || hidden_widths.size() > 3) {
    throw ValidationError(
        fmt::format("hidden layer count {} outside [1, 3]", hidden_widths.size()));
  }
  for (const auto w : hidden_widths) {
    if (w < 1) throw ValidationError("hidden widths must be at least 1");
  }
}

MLPModel::MLPModel(MLPConfig config, std::vector<DenseLayer> layers)
    : config_(std::move(config)), layers_(std::move(layers)) {
  config_.validate();
  if (layers_.size() != config_.hidden_widths.size() + 1) {
    throw ShapeError(fmt::format("config has {} layers, got {}",
                                 config_.hidden_widths.size() + 1, layers_.size()));
  }
  std::size_t fan_in = config_.input_dim;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::size_t fan_out = l + 1 < layers_.size() ? config_.hidden_widths[l] : 1;
    const auto& layer = layers_[l];
    if (layer.weights.rows() != fan_out || layer.weights.cols() != fan_in ||
        layer.bias.size() != fan_out) {
      throw ShapeError(fmt::format("layer {} is {}x{} (+{} biases), expected {}x{}", l,
                                   layer.weights.rows(), layer.weights.cols(), layer.bias.size(),
                                   fan_out, fan_in));
    }
    fan_in = fan_out;
  }
}

std::size_t MLPModel::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

MLPModel init_model(const MLPConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.init_seed);
  std::vector<DenseLayer> layers;
  std::size_t fan_in = config.input_dim;
  for (std::size_t l = 0; l <= config.hidden_widths.size(); ++l) {
    const std::size_t fan_out = l < config.hidden_widths.size() ? config.hidden_widths[l] : 1;
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    DenseLayer layer{Matrix(fan_out, fan_in), std::vector<double>(fan_out, 0.0)};
    for (double& w : layer.weights.flat()) w = dist(rng);
    layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  return MLPModel(config, std::move(layers));
}

namespace {

bool relu_after(const MLPModel& model, std::size_t layer) {
  return layer + 1 < model.layers().size() || model.config().final_relu;
}

// out = in * W^T + b
void affine(const Matrix& in, const DenseLayer& layer, Matrix& out) {
  const std::size_t fan_out = layer.weights.rows();
  const std::size_t fan_in = layer.weights.cols();
  for (std::size_t i = 0; i < in.rows(); ++i) {
    const auto x = in.row(i);
    auto z = out.row(i);
    for (std::size_t o = 0; o < fan_out; ++o) {
      const auto w = layer.weights.row(o);
      double acc = layer.bias[o];
      for (std::size_t k = 0; k < fan_in; ++k) acc += w[k] * x[k];
      z[o] = acc;
    }
  }
}

}  // namespace

ForwardResult forward(const MLPModel& model, const Matrix& batch) {
  if (batch.cols() != model.config().input_dim) {
    throw ShapeError(fmt::format("model expects {} inputs, batch has {}",
                                 model.config().input_dim, batch.cols()));
  }
  for (const double v : batch.flat()) {
    if (!std::isfinite(v)) throw ValidationError("non-finite model input");
  }

  ForwardResult res;
  res.cache.input = batch;
  res.cache.model_revision = model.revision();
  const Matrix* current = &res.cache.input;
  const auto& layers = model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Matrix z(batch.rows(), layers[l].weights.rows());
    affine(*current, layers[l], z);
    Matrix a = z;
    if (relu_after(model, l)) {
      for (double& v : a.flat()) v = std::max(v, 0.0);
    }
    res.cache.pre_activations.push_back(std::move(z));
    res.cache.outputs.push_back(std::move(a));
    current = &res.cache.outputs.back();
  }
  const auto out = res.cache.outputs.back().flat();
  res.predictions.assign(out.begin(), out.end());
  return res;
}

double predict_one(const MLPModel& model, std::span<const double> x) {
  Matrix m(1, x.size());
  std::copy(x.begin(), x.end(), m.row(0).begin());
  return forward(model, m).predictions.front();
}

LossResult mae_loss(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size()) {
    throw ShapeError(fmt::format("{} predictions vs {} targets", predictions.size(),
                                 targets.size()));
  }
  if (predictions.empty()) throw ShapeError("loss over an empty batch");
  const double n = static_cast<double>(predictions.size());
  LossResult res;
  res.gradient.resize(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double r = predictions[i] - targets[i];
    res.loss += std::abs(r);
    res.gradient[i] = r > 0.0 ? 1.0 / n : (r < 0.0 ? -1.0 / n : 0.0);
  }
  res.loss /= n;
  return res;
}

double mse(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size() || predictions.empty()) {
    throw ShapeError("mse needs equal, non-empty spans");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double r = predictions[i] - targets[i];
    acc += r * r;
  }
  return acc / static_cast<double>(predictions.size());
}

GradientSet GradientSet::zeros_like(const MLPModel& model) {
  GradientSet g;
  for (const auto& l : model.layers()) {
    g.layers.push_back({Matrix(l.weights.rows(), l.weights.cols()),
                        std::vector<double>(l.bias.size(), 0.0)});
  }
  return g;
}

GradientSet backward(const MLPModel& model, const ActivationCache& cache,
                     std::span<const double> loss_gradient) {
  const auto& layers = model.layers();
  if (cache.model_revision != model.revision()) {
    throw ContractError("activation cache is stale: the model changed after forward()");
  }
  if (cache.pre_activations.size() != layers.size() || cache.outputs.size() != layers.size() ||
      cache.input.cols() != model.config().input_dim) {
    throw ContractError("activation cache does not match the model architecture");
  }
  const std::size_t rows = cache.input.rows();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (cache.pre_activations[l].rows() != rows ||
        cache.pre_activations[l].cols() != layers[l].weights.rows()) {
      throw ContractError(fmt::format("activation cache layer {} has the wrong shape", l));
    }
  }
  if (loss_gradient.size() != rows) {
    throw ShapeError(fmt::format("loss gradient has {} entries for a batch of {}",
                                 loss_gradient.size(), rows));
  }

  GradientSet grads = GradientSet::zeros_like(model);
  Matrix upstream(rows, 1);
  std::copy(loss_gradient.begin(), loss_gradient.end(), upstream.flat().begin());

  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto& layer = layers[l];
    const std::size_t fan_out = layer.weights.rows();
    const std::size_t fan_in = layer.weights.cols();
    const Matrix& z = cache.pre_activations[l];
    const Matrix& in = l == 0 ? cache.input : cache.outputs[l - 1];

    Matrix dz = upstream;
    if (relu_after(model, l)) {
      for (std::size_t i = 0; i < dz.size(); ++i) {
        if (!(z.flat()[i] > 0.0)) dz.flat()[i] = 0.0;
      }
    }

    auto& g = grads.layers[l];
    for (std::size_t i = 0; i < rows; ++i) {
      const auto x = in.row(i);
      const auto d = dz.row(i);
      for (std::size_t o = 0; o < fan_out; ++o) {
        if (d[o] == 0.0) continue;
        auto gw = g.weights.row(o);
        for (std::size_t k = 0; k < fan_in; ++k) gw[k] += d[o] * x[k];
        g.bias[o] += d[o];
      }
    }

    if (l > 0) {
      Matrix next(rows, fan_in);
      for (std::size_t i = 0; i < rows; ++i) {
        const auto d = dz.row(i);
        auto dx = next.row(i);
        for (std::size_t o = 0; o < fan_out; ++o) {
          if (d[o] == 0.0) continue;
          const auto w = layer.weights.row(o);
          for (std::size_t k = 0; k < fan_in; ++k) dx[k] += d[o] * w[k];
        }
      }
      upstream = std::move(next);
    }
  }
  return grads;
}

namespace {

void check_congruent(const MLPModel& model, const GradientSet& grads) {
  const auto& layers = model.layers();
  if (grads.layers.size() != layers.size()) {
    throw ShapeError(fmt::format("gradient has {} layers, model has {}", grads.layers.size(),
                                 layers.size()));
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& g = grads.layers[l];
    if (g.weights.rows() != layers[l].weights.rows() ||
        g.weights.cols() != layers[l].weights.cols() || g.bias.size() != layers[l].bias.size()) {
      throw ShapeError(fmt::format("gradient layer {} does not match the model", l));
    }
  }
}


}  // namespace

void sgd_step(MLPModel& model, const GradientSet& grads, const SgdState& state) {
  check_congruent(model, grads);
  const double lr = state.learning_rate;
  const auto descend = [lr](std::span<double> theta, std::span<const double> g) {
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * g[i];
  };
  auto& params = model.mutable_layers();
  for (std::size_t l = 0; l < params.size(); ++l) {
    descend(params[l].weights.flat(), grads.layers[l].weights.flat());
    descend(params[l].bias, grads.layers[l].bias);
  }
}

void adam_step(MLPModel& model, const GradientSet& grads, AdamState& s) {
  check_congruent(model, grads);
  if (s.first_moments.layers.empty()) {
    s.first_moments = GradientSet::zeros_like(model);
    s.second_moments = GradientSet::zeros_like(model);
  }
  check_congruent(model, s.first_moments);
  check_congruent(model, s.second_moments);

  ++s.step_count;
  const double t = static_cast<double>(s.step_count);
  const double bc1 = 1.0 - std::pow(s.beta1, t);
  const double bc2 = 1.0 - std::pow(s.beta2, t);

  auto& params = model.mutable_layers();
  for (std::size_t l = 0; l < params.size(); ++l) {
    const auto update = [&](std::span<double> theta, std::span<const double> g,
                            std::span<double> m, std::span<double> v) {
      for (std::size_t i = 0; i < theta.size(); ++i) {
        m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
        v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        theta[i] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
      }
    };
    update(params[l].weights.flat(), grads.layers[l].weights.flat(),
           s.first_moments.layers[l].weights.flat(), s.second_moments.layers[l].weights.flat());
    update(params[l].bias, grads.layers[l].bias, s.first_moments.layers[l].bias,
           s.second_moments.layers[l].bias);
  }
}

void optimizer_step(MLPModel& model, const GradientSet& grads, OptimizerState& state) {
  std::visit(
      [&](auto& st) {
        using T = std::decay_t<decltype(st)>;
        if constexpr (std::is_same_v<T, SgdState>) {
          sgd_step(model, grads, st);
        } else {
          adam_step(model, grads, st);
        }
      },
      state);
}

namespace {

struct Probe {
  long double loss;
  long double min_margin;     // smallest |pre-activation| feeding a ReLU, or |residual|
  std::vector<bool> pattern;  // ReLU on/off per unit, then residual sign
};

// Single-sample forward pass in extended precision with one parameter shifted
// by `delta`. The shift is applied in extended precision too, so theta +- h is
// not rounded back to a double.
Probe probe(const MLPModel& model, std::span<const double> x, double target,
            const ParameterCoordinate& coord, long double delta) {
  Probe p{0.0L, std::numeric_limits<long double>::infinity(), {}};
  std::vector<long double> in(x.begin(), x.end());
  std::vector<long double> out;
  const auto& layers = model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const DenseLayer& layer = layers[l];
    out.assign(layer.weights.rows(), 0.0L);
    const bool relu = relu_after(model, l);
    for (std::size_t o = 0; o < layer.weights.rows(); ++o) {
      long double acc = layer.bias[o];
      if (coord.layer == l && coord.is_bias && coord.row == o) acc += delta;
      const auto w = layer.weights.row(o);
      for (std::size_t k = 0; k < w.size(); ++k) {
        long double wk = w[k];
        if (coord.layer == l && !coord.is_bias && coord.row == o && coord.col == k) wk += delta;
        acc += wk * in[k];
      }
      if (relu) {
        p.pattern.push_back(acc > 0.0L);
        p.min_margin = std::min(p.min_margin, std::fabs(acc));
        acc = std::max(acc, 0.0L);
      }
      out[o] = acc;
    }
    in.swap(out);
  }
  const long double residual = in[0] - static_cast<long double>(target);
  p.loss = std::fabs(residual);
  p.min_margin = std::min(p.min_margin, p.loss);
  p.pattern.push_back(residual > 0.0L);
  return p;
}

}  // namespace

GradCheckReport compare_gradients(const MLPModel& model, std::span<const double> x, double target,
                                  const GradientSet& analytic, double h, double tolerance) {
  if (!(h > 0.0)) throw ValidationError("finite-difference step must be positive");
  check_congruent(model, analytic);
  if (x.size() != model.config().input_dim) {
    throw ShapeError(fmt::format("input has {} features, model expects {}", x.size(),
                                 model.config().input_dim));
  }

  GradCheckReport report;
  const Probe base = probe(model, x, target, ParameterCoordinate{}, 0.0L);
  if (base.min_margin < kKinkMargin) {
    report.excluded = model.parameter_count();
    return report;
  }

  const auto check = [&](ParameterCoordinate coord, double a) {
    const Probe plus = probe(model, x, target, coord, h);
    const Probe minus = probe(model, x, target, coord, -static_cast<long double>(h));
    if (plus.pattern != base.pattern || minus.pattern != base.pattern ||
        plus.min_margin < kKinkMargin || minus.min_margin < kKinkMargin) {
      ++report.excluded;
      return;
    }
    const auto n = static_cast<double>((plus.loss - minus.loss) / (2.0L * h));
    const double err = std::abs(a - n) / std::max({std::abs(a), std::abs(n), kGradCheckFloor});
    ++report.compared;
    if (!report.worst || err > report.max_relative_error) {
      report.max_relative_error = err;
      report.worst = coord;
    }
  };

  const auto& layers = model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& w = layers[l].weights;
    for (std::size_t r = 0; r < w.rows(); ++r) {
      for (std::size_t c = 0; c < w.cols(); ++c) {
        check({l, false, r, c}, analytic.layers[l].weights(r, c));
      }
    }
    for (std::size_t r = 0; r < layers[l].bias.size(); ++r) {
      check({l, true, r, 0}, analytic.layers[l].bias[r]);
    }
  }
  report.passed = report.max_relative_error < tolerance;
  return report;
}

GradCheckReport grad_check(const MLPModel& model, std::span<const double> x, double target,
                           double h, double tolerance) {
  Matrix m(1, x.size());
  std::copy(x.begin(), x.end(), m.row(0).begin());
  const ForwardResult fr = forward(model, m);
  const LossResult loss = mae_loss(fr.predictions, std::span<const double>(&target, 1));
  return compare_gradients(model, x, target, backward(model, fr.cache, loss.gradient), h,
                           tolerance);
}

}  // namespace solarcast
