#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fedism::fed {

/// Brute-force check that the client-level minimax objective (max over the
/// client simplex) and the attribute-level one (max over the attribute
/// simplex) pick the same model when clients sharing an attribute share a
/// distribution.
///
/// `risk_table[k][m]` is the risk of candidate model m on client k. Both inner
/// maxima are searched over a regular simplex grid with step
/// `grid_resolution`; the grid contains every vertex, so the maxima are exact
/// for linear objectives up to rounding.
struct MinimaxReport {
  std::size_t clients = 0;
  std::size_t attributes = 0;
  std::size_t models = 0;

  std::vector<double> client_max;     // per column, max over the client simplex
  std::vector<double> attribute_max;  // per column, max over the attribute simplex
  std::vector<double> row_max;        // per column, max_k risk_table[k][m]

  std::size_t client_argmin = 0;
  std::size_t attribute_argmin = 0;
  double client_value = 0.0;
  double attribute_value = 0.0;

  std::vector<double> lambda_star;  // recovered client-simplex maximiser at the argmin column
  std::vector<double> mu_star;      // recovered attribute-simplex maximiser
  std::vector<double> mu_from_lambda;  // sum_k 1[a_k = u] lambda*_k

  bool values_agree = false;      // per-column maxima match within tolerance
  bool argmin_agrees = false;
  bool mu_relation_holds = false; // mu_from_lambda attains the attribute-level max
  double tolerance = 0.0;

  bool passed() const { return values_agree && argmin_agrees && mu_relation_holds; }
};

using RiskTable = std::vector<std::vector<double>>;

/// Throws std::invalid_argument when rows of clients with the same attribute
/// differ, when an attribute in [0, A) has no client, or on malformed input.
MinimaxReport verify_minimax_equivalence(const RiskTable& risk_table,
                                         std::span<const int> attributes,
                                         double grid_resolution = 0.01);

/// Maximum of dot(lambda, r) over the regular simplex grid of step
/// `resolution`; writes the maximiser to `argmax` when non-null.
double simplex_grid_max(std::span<const double> r, double resolution,
                        std::vector<double>* argmax = nullptr);

}  // namespace fedism::fed
