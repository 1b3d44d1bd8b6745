#pragma once

#include <cstddef>
#include <memory>
#include <span>

#include "fedism/nn.hpp"

namespace fedism::sharpness {

/// Gradient norms at or below this are treated as an exact stationary point.
inline constexpr double kZeroGradientNorm = 1e-12;

struct PerturbationVector {
  std::vector<double> values;
  double rho = 0.0;
  bool degenerate = false;
};

struct SharpnessValue {
  double value = 0.0;
  double rho = 0.0;
  std::size_t n_samples = 0;
  /// Loss at the unperturbed parameters, computed as a by-product.
  double base_loss = 0.0;
};

/// rho * g / ||g||, or the zero vector with `degenerate` set when ||g|| is
/// below kZeroGradientNorm.
PerturbationVector optimal_perturbation(const nn::GradientVector& grad, double rho);

/// First-order sharpness: loss(theta + eps*) - loss(theta), with eps* built
/// from the gradient of the same objective at theta.
SharpnessValue sharpness(const nn::Objective& objective, const nn::ParameterVector& params,
                         double rho, std::size_t n_samples);

SharpnessValue sharpness(const nn::MlpArchitecture& arch, const nn::ParameterVector& params,
                         std::span<const Sample> dataset, double rho,
                         const nn::ClassPriors& priors, double tau);

nn::ParameterVector plain_step(const nn::Objective& objective, const nn::ParameterVector& params,
                               double eta);

/// theta - eta * grad(theta + eps*), eps* from the gradient at theta. Falls
/// back to the plain step when the perturbation is degenerate.
nn::ParameterVector sam_step(const nn::Objective& objective, const nn::ParameterVector& params,
                             double rho, double eta);

nn::ParameterVector plain_step(const nn::MlpArchitecture& arch, const nn::ParameterVector& params,
                               std::span<const Sample> batch, double eta,
                               const nn::ClassPriors& priors, double tau);

nn::ParameterVector sam_step(const nn::MlpArchitecture& arch, const nn::ParameterVector& params,
                             std::span<const Sample> batch, double rho, double eta,
                             const nn::ClassPriors& priors, double tau);

/// One local optimizer step on a mini-batch objective. Local training only
/// talks to this interface, so variants such as GSAM can be added as new
/// implementations without touching the federation loop.
class LocalUpdateRule {
 public:
  virtual ~LocalUpdateRule() = default;
  virtual nn::ParameterVector step(const nn::Objective& objective,
                                   const nn::ParameterVector& params) const = 0;
};

class PlainUpdate final : public LocalUpdateRule {
 public:
  explicit PlainUpdate(double eta) : eta_(eta) {}
  nn::ParameterVector step(const nn::Objective& objective,
                           const nn::ParameterVector& params) const override {
    return plain_step(objective, params, eta_);
  }

 private:
  double eta_;
};

class SamUpdate final : public LocalUpdateRule {
 public:
  SamUpdate(double rho, double eta) : rho_(rho), eta_(eta) {}
  nn::ParameterVector step(const nn::Objective& objective,
                           const nn::ParameterVector& params) const override {
    return sam_step(objective, params, rho_, eta_);
  }

 private:
  double rho_;
  double eta_;
};

}  // namespace fedism::sharpness
