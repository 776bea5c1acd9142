#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "solarcast/features.hpp"
#include "solarcast/matrix.hpp"

namespace solarcast {

struct MLPConfig {
  std::size_t input_dim = kFeatureCount;
  std::vector<std::size_t> hidden_widths{32, 32};
  bool final_relu = false;  ///< clamp predictions at zero
  std::uint64_t init_seed = 0;

  /// 1..3 hidden layers, all widths and input_dim >= 1.
  void validate() const;
  bool operator==(const MLPConfig&) const = default;
};

/// y = W x + b with W stored fan_out x fan_in, row-major.
struct DenseLayer {
  Matrix weights;
  std::vector<double> bias;

  bool operator==(const DenseLayer&) const = default;
};

class MLPModel {
 public:
  /// Throws ShapeError unless the layers chain input_dim -> hidden... -> 1.
  MLPModel(MLPConfig config, std::vector<DenseLayer> layers);

  const MLPConfig& config() const noexcept { return config_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

  /// Write access for optimizers and hand-built fixtures. Every call
  /// invalidates activation caches taken from earlier forward passes.
  std::vector<DenseLayer>& mutable_layers() noexcept {
    ++revision_;
    return layers_;
  }

  std::uint64_t revision() const noexcept { return revision_; }
  std::size_t parameter_count() const noexcept;

  /// Parameters only; the revision counter is not part of a model's value.
  bool operator==(const MLPModel& other) const {
    return config_ == other.config_ && layers_ == other.layers_;
  }

 private:
  MLPConfig config_;
  std::vector<DenseLayer> layers_;
  std::uint64_t revision_ = 0;
};

/// Kaiming-normal weights, N(0, 2 / fan_in), zero biases. Deterministic in
/// config.init_seed.
MLPModel init_model(const MLPConfig& config);

/// Everything backward() needs from a forward pass.
struct ActivationCache {
  Matrix input;
  std::vector<Matrix> pre_activations;  ///< per layer, rows x fan_out
  std::vector<Matrix> outputs;          ///< per layer, after the activation
  std::uint64_t model_revision = 0;
};

struct ForwardResult {
  std::vector<double> predictions;
  ActivationCache cache;
};

/// Batch forward; rows of `batch` are samples. Throws ShapeError on an arity
/// mismatch and ValidationError on non-finite input.
ForwardResult forward(const MLPModel& model, const Matrix& batch);
double predict_one(const MLPModel& model, std::span<const double> x);

struct LossResult {
  double loss = 0.0;
  std::vector<double> gradient;  ///< dL/dprediction
};

/// Mean absolute error. The subgradient at a zero residual is 0.
LossResult mae_loss(std::span<const double> predictions, std::span<const double> targets);
double mse(std::span<const double> predictions, std::span<const double> targets);

/// dL/dtheta, laid out like the model.
struct GradientSet {
  std::vector<DenseLayer> layers;

  static GradientSet zeros_like(const MLPModel& model);
  bool operator==(const GradientSet&) const = default;
};

/// Reverse-mode pass. ReLU'(0) is taken as 0. Throws ContractError if the
/// cache came from another model or an earlier parameter revision.
GradientSet backward(const MLPModel& model, const ActivationCache& cache,
                     std::span<const double> loss_gradient);

struct SgdState {
  double learning_rate = 0.001;
};

struct AdamState {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  GradientSet first_moments;   ///< empty until the first step
  GradientSet second_moments;
  std::uint64_t step_count = 0;
};

using OptimizerState = std::variant<SgdState, AdamState>;

/// theta <- theta - lr * g
void sgd_step(MLPModel& model, const GradientSet& grads, const SgdState& state);

/// Bias-corrected Adam update; moments are allocated on the first call.
void adam_step(MLPModel& model, const GradientSet& grads, AdamState& state);

void optimizer_step(MLPModel& model, const GradientSet& grads, OptimizerState& state);

struct ParameterCoordinate {
  std::size_t layer = 0;
  bool is_bias = false;
  std::size_t row = 0;
  std::size_t col = 0;  ///< 0 for biases

  bool operator==(const ParameterCoordinate&) const = default;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::optional<ParameterCoordinate> worst;
  std::size_t compared = 0;
  std::size_t excluded = 0;  ///< coordinates near a ReLU kink or zero residual
  bool passed = true;
};

/// Relative error is |a - n| / max(|a|, |n|, kGradCheckFloor).
inline constexpr double kGradCheckFloor = 1e-6;
/// Distance from a kink (pre-activation or residual) below which a
/// coordinate is not compared.
inline constexpr double kKinkMargin = 1e-7;

/// Central finite differences of the single-sample MAE against `analytic`.
/// The perturbed losses are evaluated in long double.
GradCheckReport compare_gradients(const MLPModel& model, std::span<const double> x, double target,
                                  const GradientSet& analytic, double h, double tolerance);

/// compare_gradients against backward().
GradCheckReport grad_check(const MLPModel& model, std::span<const double> x, double target,
                           double h, double tolerance);

}  // namespace solarcast
