#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fedism/nn.hpp"

namespace fedism::verify {

/// Outcome of one named check. `measured` is the worst value observed and is
/// compared against `tolerance` in the direction described by `criterion`.
struct Check {
  std::string name;
  std::string criterion;
  double measured = 0.0;
  double tolerance = 0.0;
  std::size_t instances = 0;
  bool passed = false;
  std::string detail;
};

struct Report {
  std::vector<Check> checks;

  bool passed() const;
  std::string text() const;
};

using GradientFn = std::function<nn::LossAndGrad(
    const nn::MlpArchitecture&, const nn::ParameterVector&, std::span<const Sample>,
    const nn::ClassPriors&, double)>;

struct Options {
  std::uint64_t seed = 0;
  std::size_t gradient_instances = 100;
  std::size_t sharpness_instances = 50;
  std::size_t simplex_instances = 200;
  std::size_t minimax_instances = 200;
  /// Gradient under test; defaults to nn::batch_loss_and_grad.
  GradientFn gradient;
};

/// Random small MLP problem: d <= 5, C <= 4, one hidden layer <= 8, batch <= 8.
struct MlpInstance {
  nn::MlpArchitecture arch;
  nn::ParameterVector params;
  std::vector<Sample> batch;
  nn::ClassPriors priors;
  double tau = 0.0;
};

MlpInstance random_instance(std::uint64_t seed, nn::Activation activation);

Check gradient_check(const Options& options);
Check sharpness_ratio_check(const Options& options);
Check sharpness_convergence_check(const Options& options);
Check simplex_check(const Options& options);
Check minimax_check(const Options& options);

Report run_all(const Options& options);

}  // namespace fedism::verify
