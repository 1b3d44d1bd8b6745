#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fedism/nn.hpp"
#include "fedism/sample.hpp"

namespace fedism::metrics {

/// Mean over classes of per-class recall. Every class in [0, C) must occur
/// among the labels.
double balanced_accuracy(std::span<const int> predictions, std::span<const int> labels,
                         std::size_t classes);

/// Macro one-vs-rest ROC AUC. `scores` is row-major, one C-vector per sample.
/// Per-class AUC uses the Mann-Whitney rank statistic with midranks for ties.
double macro_auc_ovr(std::span<const double> scores, std::span<const int> labels,
                     std::size_t classes);

/// AUC of a single score column for binary labels (1 = positive).
double binary_auc(std::span<const double> scores, std::span<const int> positive);

struct EvalMetrics {
  double acc_clean = 0.0;
  double auc_clean = 0.0;
  double acc_corrupted = 0.0;
  double auc_corrupted = 0.0;
  double acc_avg = 0.0;
  double auc_avg = 0.0;
};

struct DistributionMetrics {
  double acc = 0.0;
  double auc = 0.0;
};

/// Raw logits (no prior adjustment) serve as scores.
DistributionMetrics evaluate_distribution(const nn::MlpArchitecture& arch,
                                          const nn::ParameterVector& params,
                                          std::span<const Sample> test);

EvalMetrics evaluate(const nn::MlpArchitecture& arch, const nn::ParameterVector& params,
                     std::span<const Sample> clean_test, std::span<const Sample> corrupted_test);

struct LandscapeGrid {
  double extent = 1.0;
  std::size_t steps = 21;  // points per axis, spanning [-extent, extent]
};

struct LandscapePoint {
  double x = 0.0;
  double y = 0.0;
  double loss = 0.0;
};

/// Orthonormalises the pair with Gram-Schmidt; throws if they are
/// (numerically) parallel or zero.
void orthonormalize(std::vector<double>& d1, std::vector<double>& d2);

/// Loss at params + x * d1 + y * d2 over the grid, directions orthonormalised
/// first. Points are emitted row by row (y outer, x inner).
std::vector<LandscapePoint> landscape_slice(const nn::Objective& objective,
                                            const nn::ParameterVector& params,
                                            std::vector<double> d1, std::vector<double> d2,
                                            const LandscapeGrid& grid);

std::vector<LandscapePoint> landscape_slice(const nn::MlpArchitecture& arch,
                                            const nn::ParameterVector& params,
                                            std::span<const Sample> dataset,
                                            std::vector<double> d1, std::vector<double> d2,
                                            const LandscapeGrid& grid,
                                            const nn::ClassPriors& priors, double tau);

/// Two random Gaussian directions of the given length, seeded.
std::pair<std::vector<double>, std::vector<double>> random_directions(std::size_t n,
                                                                     std::uint64_t seed);

}  // namespace fedism::metrics
