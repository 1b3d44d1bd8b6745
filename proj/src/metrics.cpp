#include "fedism/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "fedism/rng.hpp"

namespace fedism::metrics {

namespace {

void check_labels(std::span<const int> labels, std::size_t classes) {
  std::vector<std::size_t> counts(classes, 0);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw std::invalid_argument("label " + std::to_string(y) + " out of range");
    }
    ++counts[static_cast<std::size_t>(y)];
  }
  for (std::size_t c = 0; c < classes; ++c) {
    if (counts[c] == 0) {
      throw std::invalid_argument("class " + std::to_string(c) + " does not occur in the labels");
    }
  }
}

}  // namespace

double balanced_accuracy(std::span<const int> predictions, std::span<const int> labels,
                         std::size_t classes) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("predictions and labels differ in length");
  }
  check_labels(labels, classes);
  std::vector<double> hits(classes, 0.0), totals(classes, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    totals[c] += 1.0;
    if (predictions[i] == labels[i]) hits[c] += 1.0;
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < classes; ++c) sum += hits[c] / totals[c];
  return sum / static_cast<double>(classes);
}

double binary_auc(std::span<const double> scores, std::span<const int> positive) {
  if (scores.size() != positive.size()) throw std::invalid_argument("length mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  double n_pos = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t t = i; t < j; ++t) {
      if (positive[order[t]]) {
        pos_rank_sum += midrank;
        n_pos += 1.0;
      }
    }
    i = j;
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) {
    throw std::invalid_argument("AUC needs both positive and negative samples");
  }
  return (pos_rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

double macro_auc_ovr(std::span<const double> scores, std::span<const int> labels,
                     std::size_t classes) {
  if (scores.size() != labels.size() * classes) {
    throw std::invalid_argument("score matrix must have one row of C scores per label");
  }
  check_labels(labels, classes);
  if (classes < 2) throw std::invalid_argument("AUC needs at least two classes");
  std::vector<double> column(labels.size());
  std::vector<int> positive(labels.size());
  double total = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      column[i] = scores[i * classes + c];
      positive[i] = labels[i] == static_cast<int>(c) ? 1 : 0;
    }
    total += binary_auc(column, positive);
  }
  return total / static_cast<double>(classes);
}

DistributionMetrics evaluate_distribution(const nn::MlpArchitecture& arch,
                                          const nn::ParameterVector& params,
                                          std::span<const Sample> test) {
  if (test.empty()) throw std::invalid_argument("empty test set");
  const std::size_t c = arch.num_classes();
  std::vector<double> scores;
  scores.reserve(test.size() * c);
  std::vector<int> preds, labels;
  preds.reserve(test.size());
  labels.reserve(test.size());
  for (const auto& s : test) {
    auto z = nn::forward(arch, params, s.x);
    preds.push_back(static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin()));
    labels.push_back(s.y);
    scores.insert(scores.end(), z.begin(), z.end());
  }
  return {balanced_accuracy(preds, labels, c), macro_auc_ovr(scores, labels, c)};
}

EvalMetrics evaluate(const nn::MlpArchitecture& arch, const nn::ParameterVector& params,
                     std::span<const Sample> clean_test, std::span<const Sample> corrupted_test) {
  const auto clean = evaluate_distribution(arch, params, clean_test);
  const auto corrupted = evaluate_distribution(arch, params, corrupted_test);
  EvalMetrics m;
  m.acc_clean = clean.acc;
  m.auc_clean = clean.auc;
  m.acc_corrupted = corrupted.acc;
  m.auc_corrupted = corrupted.auc;
  m.acc_avg = 0.5 * (m.acc_clean + m.acc_corrupted);
  m.auc_avg = 0.5 * (m.auc_clean + m.auc_corrupted);
  return m;
}

void orthonormalize(std::vector<double>& d1, std::vector<double>& d2) {
  if (d1.size() != d2.size()) throw std::invalid_argument("directions differ in length");
  auto norm = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };
  const double n1 = norm(d1);
  if (!(n1 > 1e-12)) throw std::invalid_argument("first direction is zero");
  for (auto& v : d1) v /= n1;
  double proj = 0.0;
  for (std::size_t i = 0; i < d1.size(); ++i) proj += d1[i] * d2[i];
  for (std::size_t i = 0; i < d1.size(); ++i) d2[i] -= proj * d1[i];
  const double n2 = norm(d2);
  if (!(n2 > 1e-12)) throw std::invalid_argument("directions are parallel");
  for (auto& v : d2) v /= n2;
}

std::vector<LandscapePoint> landscape_slice(const nn::Objective& objective,
                                            const nn::ParameterVector& params,
                                            std::vector<double> d1, std::vector<double> d2,
                                            const LandscapeGrid& grid) {
  if (d1.size() != params.size()) throw std::invalid_argument("direction length mismatch");
  if (grid.steps < 1 || !(grid.extent >= 0.0)) throw std::invalid_argument("bad landscape grid");
  orthonormalize(d1, d2);
  std::vector<LandscapePoint> out;
  out.reserve(grid.steps * grid.steps);
  std::vector<double> probe(params.size());
  // Coordinates are symmetric about 0 so the centre point is exactly the origin
  // whenever `steps` is odd.
  auto coord = [&](std::size_t i) {
    if (grid.steps == 1) return 0.0;
    const double half = 0.5 * static_cast<double>(grid.steps - 1);
    return grid.extent * (static_cast<double>(i) - half) / half;
  };
  for (std::size_t iy = 0; iy < grid.steps; ++iy) {
    for (std::size_t ix = 0; ix < grid.steps; ++ix) {
      const double x = coord(ix), y = coord(iy);
      for (std::size_t i = 0; i < probe.size(); ++i) {
        probe[i] = params.values[i] + x * d1[i] + y * d2[i];
      }
      out.push_back({x, y, objective.loss(probe)});
    }
  }
  return out;
}

std::vector<LandscapePoint> landscape_slice(const nn::MlpArchitecture& arch,
                                            const nn::ParameterVector& params,
                                            std::span<const Sample> dataset,
                                            std::vector<double> d1, std::vector<double> d2,
                                            const LandscapeGrid& grid,
                                            const nn::ClassPriors& priors, double tau) {
  nn::MlpObjective objective(arch, dataset, priors, tau);
  return landscape_slice(objective, params, std::move(d1), std::move(d2), grid);
}

std::pair<std::vector<double>, std::vector<double>> random_directions(std::size_t n,
                                                                     std::uint64_t seed) {
  Rng rng = make_rng(seed, Stream::landscape);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<double> a(n), b(n);
  for (auto& v : a) v = unit(rng);
  for (auto& v : b) v = unit(rng);
  return {std::move(a), std::move(b)};
}

}  // namespace fedism::metrics
