#include "fedism/sharpness.hpp"

#include <cmath>
#include <stdexcept>

namespace fedism::sharpness {

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string(name) + " must be positive and finite");
  }
}

std::vector<double> shifted(const nn::ParameterVector& params, std::span<const double> delta) {
  std::vector<double> out = params.values;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += delta[i];
  return out;
}

nn::ParameterVector descend(const nn::ParameterVector& params, const nn::GradientVector& g,
                            double eta) {
  nn::ParameterVector out = params;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] -= eta * g.values[i];
  return out;
}

}  // namespace

PerturbationVector optimal_perturbation(const nn::GradientVector& grad, double rho) {
  require_positive(rho, "rho");
  if (!grad.all_finite()) throw std::invalid_argument("gradient has non-finite entries");
  PerturbationVector eps{std::vector<double>(grad.size(), 0.0), rho, false};
  const double norm = grad.norm();
  if (norm <= kZeroGradientNorm) {
    eps.degenerate = true;
    return eps;
  }
  const double scale = rho / norm;
  for (std::size_t i = 0; i < grad.size(); ++i) eps.values[i] = scale * grad.values[i];
  return eps;
}

SharpnessValue sharpness(const nn::Objective& objective, const nn::ParameterVector& params,
                         double rho, std::size_t n_samples) {
  auto base = objective.loss_and_grad(params.values);
  auto eps = optimal_perturbation(base.grad, rho);
  SharpnessValue s{0.0, rho, n_samples, base.loss};
  if (eps.degenerate) return s;
  s.value = objective.loss(shifted(params, eps.values)) - base.loss;
  return s;
}

SharpnessValue sharpness(const nn::MlpArchitecture& arch, const nn::ParameterVector& params,
                         std::span<const Sample> dataset, double rho,
                         const nn::ClassPriors& priors, double tau) {
  nn::MlpObjective objective(arch, dataset, priors, tau);
  return sharpness(objective, params, rho, dataset.size());
}

nn::ParameterVector plain_step(const nn::Objective& objective, const nn::ParameterVector& params,
                               double eta) {
  if (eta < 0.0 || !std::isfinite(eta)) throw std::invalid_argument("eta must be nonnegative");
  if (eta == 0.0) return params;
  return descend(params, objective.loss_and_grad(params.values).grad, eta);
}

nn::ParameterVector sam_step(const nn::Objective& objective, const nn::ParameterVector& params,
                             double rho, double eta) {
  if (eta < 0.0 || !std::isfinite(eta)) throw std::invalid_argument("eta must be nonnegative");
  if (eta == 0.0) return params;
  auto first = objective.loss_and_grad(params.values);
  auto eps = optimal_perturbation(first.grad, rho);
  if (eps.degenerate) return descend(params, first.grad, eta);
  auto second = objective.loss_and_grad(shifted(params, eps.values));
  return descend(params, second.grad, eta);
}

nn::ParameterVector plain_step(const nn::MlpArchitecture& arch, const nn::ParameterVector& params,
                               std::span<const Sample> batch, double eta,
                               const nn::ClassPriors& priors, double tau) {
  nn::MlpObjective objective(arch, batch, priors, tau);
  return plain_step(objective, params, eta);
}

nn::ParameterVector sam_step(const nn::MlpArchitecture& arch, const nn::ParameterVector& params,
                             std::span<const Sample> batch, double rho, double eta,
                             const nn::ClassPriors& priors, double tau) {
  nn::MlpObjective objective(arch, batch, priors, tau);
  return sam_step(objective, params, rho, eta);
}

}  // namespace fedism::sharpness
