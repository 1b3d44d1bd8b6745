#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fedism/sample.hpp"

namespace fedism::nn {

enum class Activation { relu, tanh };

/// Layer widths from input to output, e.g. {d, 32, C}.
struct MlpArchitecture {
  std::vector<std::size_t> layer_widths;
  Activation activation = Activation::relu;

  MlpArchitecture() = default;
  MlpArchitecture(std::vector<std::size_t> widths, Activation act = Activation::relu);

  std::size_t input_width() const { return layer_widths.front(); }
  std::size_t num_classes() const { return layer_widths.back(); }
  std::size_t num_layers() const { return layer_widths.size() - 1; }
  /// Total weights + biases. Layout per layer: weight matrix (out x in,
  /// row-major) followed by the bias vector, layers in order.
  std::size_t num_params() const;
  /// Offset of layer `l`'s weight block in the flat parameter vector.
  std::size_t weight_offset(std::size_t l) const;
  std::size_t bias_offset(std::size_t l) const;
};

struct ParameterVector {
  std::vector<double> values;

  ParameterVector() = default;
  explicit ParameterVector(std::vector<double> v) : values(std::move(v)) {}
  explicit ParameterVector(std::size_t n) : values(n, 0.0) {}

  std::size_t size() const { return values.size(); }
  std::span<const double> view() const { return values; }
  bool all_finite() const;
  bool operator==(const ParameterVector&) const = default;
};

struct GradientVector {
  std::vector<double> values;

  GradientVector() = default;
  explicit GradientVector(std::vector<double> v) : values(std::move(v)) {}
  explicit GradientVector(std::size_t n) : values(n, 0.0) {}

  std::size_t size() const { return values.size(); }
  double norm() const;
  bool all_finite() const;
};

struct ClassPriors {
  std::vector<double> pi;

  ClassPriors() = default;
  explicit ClassPriors(std::vector<double> p);  // validates

  static ClassPriors uniform(std::size_t classes);
  /// Laplace-smoothed label frequencies, (n_c + 1) / (N + C), so every prior
  /// stays strictly positive even for classes absent from a skewed shard.
  static ClassPriors from_labels(std::span<const Sample> samples, std::size_t classes);
};

struct LossAndGrad {
  double loss = 0.0;
  GradientVector grad;
};

ParameterVector init_params(const MlpArchitecture& arch, std::uint64_t seed);

std::vector<double> forward(const MlpArchitecture& arch, const ParameterVector& params,
                            std::span<const double> x);

std::vector<double> adjust_logits(std::span<const double> logits, const ClassPriors& priors,
                                  double tau);

double ce_loss(std::span<const double> logits, int y);

/// Mean adjusted cross-entropy over the batch.
double batch_loss(const MlpArchitecture& arch, const ParameterVector& params,
                  std::span<const Sample> batch, const ClassPriors& priors, double tau);

/// Mean adjusted cross-entropy over the batch and its backpropagated gradient.
LossAndGrad batch_loss_and_grad(const MlpArchitecture& arch, const ParameterVector& params,
                                std::span<const Sample> batch, const ClassPriors& priors,
                                double tau);

/// A differentiable scalar function of a flat parameter vector. The MLP loss
/// on a fixed batch is the main implementation; the sharpness and step
/// operations only see this interface, which lets closed-form toys stand in.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual std::size_t dimension() const = 0;
  virtual double loss(std::span<const double> params) const = 0;
  virtual LossAndGrad loss_and_grad(std::span<const double> params) const = 0;
};

class MlpObjective final : public Objective {
 public:
  MlpObjective(const MlpArchitecture& arch, std::span<const Sample> batch,
               const ClassPriors& priors, double tau);

  std::size_t dimension() const override { return arch_.num_params(); }
  double loss(std::span<const double> params) const override;
  LossAndGrad loss_and_grad(std::span<const double> params) const override;

 private:
  const MlpArchitecture& arch_;
  std::span<const Sample> batch_;
  const ClassPriors& priors_;
  double tau_;
};

/// Central differences (f(p + h e_i) - f(p - h e_i)) / 2h per coordinate.
GradientVector finite_diff_grad(const Objective& objective, std::span<const double> params,
                                double h);

GradientVector finite_diff_grad(const MlpArchitecture& arch, const ParameterVector& params,
                                std::span<const Sample> batch, const ClassPriors& priors,
                                double tau, double h);

}  // namespace fedism::nn
