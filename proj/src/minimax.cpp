#include "fedism/minimax.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace fedism::fed {

namespace {

// Visits every composition of `steps` into r.size() nonnegative parts.
template <typename Visit>
void for_each_grid_point(std::size_t dims, int steps, Visit&& visit) {
  std::vector<int> parts(dims, 0);
  auto recurse = [&](auto&& self, std::size_t i, int remaining) -> void {
    if (i + 1 == dims) {
      parts[i] = remaining;
      visit(parts);
      return;
    }
    for (int v = 0; v <= remaining; ++v) {
      parts[i] = v;
      self(self, i + 1, remaining - v);
    }
  };
  recurse(recurse, 0, steps);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

double simplex_grid_max(std::span<const double> r, double resolution, std::vector<double>* argmax) {
  if (r.empty()) throw std::invalid_argument("empty risk vector");
  if (!(resolution > 0.0) || resolution > 1.0) {
    throw std::invalid_argument("grid resolution must lie in (0, 1]");
  }
  const int steps = static_cast<int>(std::lround(1.0 / resolution));
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> point(r.size());
  for_each_grid_point(r.size(), steps, [&](const std::vector<int>& parts) {
    double v = 0.0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      v += static_cast<double>(parts[i]) / steps * r[i];
    }
    if (v > best) {
      best = v;
      if (argmax) {
        for (std::size_t i = 0; i < parts.size(); ++i) {
          point[i] = static_cast<double>(parts[i]) / steps;
        }
      }
    }
  });
  if (argmax) *argmax = point;
  return best;
}

MinimaxReport verify_minimax_equivalence(const RiskTable& risk_table,
                                         std::span<const int> attributes,
                                         double grid_resolution) {
  const std::size_t k = risk_table.size();
  if (k == 0) throw std::invalid_argument("risk table has no clients");
  if (attributes.size() != k) throw std::invalid_argument("one attribute per client is required");
  const std::size_t m = risk_table.front().size();
  if (m == 0) throw std::invalid_argument("risk table has no candidate models");
  int a_count = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (risk_table[i].size() != m) throw std::invalid_argument("ragged risk table");
    if (attributes[i] < 0) throw std::invalid_argument("negative attribute index");
    a_count = std::max(a_count, attributes[i] + 1);
  }
  const auto a = static_cast<std::size_t>(a_count);

  // Group risk per attribute; premise: equal rows within an attribute.
  RiskTable group(a);
  for (std::size_t i = 0; i < k; ++i) {
    auto& g = group[static_cast<std::size_t>(attributes[i])];
    if (g.empty()) {
      g = risk_table[i];
      continue;
    }
    for (std::size_t c = 0; c < m; ++c) {
      if (g[c] != risk_table[i][c]) {
        throw std::invalid_argument("clients sharing attribute " + std::to_string(attributes[i]) +
                                    " have different risks for model " + std::to_string(c));
      }
    }
  }
  for (std::size_t u = 0; u < a; ++u) {
    if (group[u].empty()) {
      throw std::invalid_argument("attribute " + std::to_string(u) + " has no client");
    }
  }

  MinimaxReport rep;
  rep.clients = k;
  rep.attributes = a;
  rep.models = m;
  double scale = 0.0;
  for (const auto& row : risk_table) {
    for (double v : row) scale = std::max(scale, std::abs(v));
  }
  rep.tolerance = 1e-9 * std::max(1.0, scale);

  std::vector<double> column(k), group_column(a);
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t i = 0; i < k; ++i) column[i] = risk_table[i][c];
    for (std::size_t u = 0; u < a; ++u) group_column[u] = group[u][c];
    rep.client_max.push_back(simplex_grid_max(column, grid_resolution));
    rep.attribute_max.push_back(simplex_grid_max(group_column, grid_resolution));
    rep.row_max.push_back(*std::max_element(column.begin(), column.end()));
  }
  auto argmin = [](const std::vector<double>& v) {
    return static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
  };
  rep.client_argmin = argmin(rep.client_max);
  rep.attribute_argmin = argmin(rep.attribute_max);
  rep.client_value = rep.client_max[rep.client_argmin];
  rep.attribute_value = rep.attribute_max[rep.attribute_argmin];

  rep.values_agree = true;
  for (std::size_t c = 0; c < m; ++c) {
    if (std::abs(rep.client_max[c] - rep.attribute_max[c]) > rep.tolerance ||
        std::abs(rep.client_max[c] - rep.row_max[c]) > rep.tolerance) {
      rep.values_agree = false;
    }
  }
  // Columns with equal minimax value are interchangeable; compare by value.
  rep.argmin_agrees =
      std::abs(rep.client_max[rep.attribute_argmin] - rep.client_value) <= rep.tolerance &&
      std::abs(rep.attribute_max[rep.client_argmin] - rep.attribute_value) <= rep.tolerance;

  const std::size_t best = rep.client_argmin;
  for (std::size_t i = 0; i < k; ++i) column[i] = risk_table[i][best];
  for (std::size_t u = 0; u < a; ++u) group_column[u] = group[u][best];
  simplex_grid_max(column, grid_resolution, &rep.lambda_star);
  const double mu_value = simplex_grid_max(group_column, grid_resolution, &rep.mu_star);
  rep.mu_from_lambda.assign(a, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    rep.mu_from_lambda[static_cast<std::size_t>(attributes[i])] += rep.lambda_star[i];
  }
  double mu_sum = 0.0;
  for (double v : rep.mu_from_lambda) mu_sum += v;
  rep.mu_relation_holds = std::abs(mu_sum - 1.0) <= 1e-9 &&
                          std::abs(dot(rep.mu_from_lambda, group_column) - mu_value) <= rep.tolerance;
  return rep;
}

}  // namespace fedism::fed
