#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedism/data.hpp"
#include "fedism/nn.hpp"
#include "fedism/sharpness.hpp"

namespace fedism::fed {

enum class LocalRule { plain, sam };
enum class AggRule { size, loss_q, sharpness_q };

struct MethodSpec {
  LocalRule local_rule = LocalRule::sam;
  AggRule agg_rule = AggRule::sharpness_q;
  double q = 2.0;
  double beta = 0.5;
  double rho = 0.05;
  double eta = 0.03;
  std::size_t batch_size = 32;
  std::size_t local_epochs = 1;
  /// Logit-adjustment temperature for training losses.
  double tau = 1.0;

  void validate() const;

  static MethodSpec fedavg();
  static MethodSpec fedavg_salt();
  static MethodSpec fedavg_saga();
  static MethodSpec fedism();
};

/// fedavg, fedavg+salt, fedavg+saga, fedism, fair-loss, fair-loss+salt.
std::string method_name(const MethodSpec& m);

std::unique_ptr<sharpness::LocalUpdateRule> make_update_rule(const MethodSpec& m);

struct ClientReport {
  int client_id = 0;
  nn::ParameterVector updated_params;
  std::size_t n_samples = 0;
  sharpness::SharpnessValue sharpness;
  double mean_loss = 0.0;
};

struct AggregationWeights {
  std::vector<double> w;

  AggregationWeights() = default;
  explicit AggregationWeights(std::vector<double> v) : w(std::move(v)) {}
  std::size_t size() const { return w.size(); }
  /// Nonnegative entries summing to 1 within `tol`.
  bool on_simplex(double tol = 1e-12) const;
};

/// Copies the global model, runs `local_epochs` passes over seeded-shuffled
/// mini-batches, then measures full-shard sharpness and mean loss at the
/// final local parameters. Shuffling depends only on (round_seed, client_id).
ClientReport local_train(const nn::MlpArchitecture& arch, const data::LocalDataset& client,
                         const nn::ParameterVector& global, const MethodSpec& method,
                         const nn::ClassPriors& priors, std::uint64_t round_seed);

AggregationWeights fedavg_weights(std::span<const std::size_t> sizes);

/// w_k = S_k^q / sum_j S_j^q. All-zero input falls back to uniform weights.
AggregationWeights sharpness_weights(std::span<const double> sharpness, double q);

/// Same functional form as sharpness_weights, driven by client losses.
AggregationWeights loss_weights(std::span<const double> losses, double q);

/// Moving average beta * w_tilde + (1 - beta) * w_prev; round 1 returns w_tilde.
AggregationWeights smooth_weights(const AggregationWeights& w_tilde,
                                  const std::optional<AggregationWeights>& w_prev, double beta,
                                  std::size_t t);

nn::ParameterVector aggregate(std::span<const ClientReport> reports, const AggregationWeights& w);

struct FederationState {
  nn::ParameterVector global;
  /// Weights used in the previous round; consumed by the moving average.
  std::optional<AggregationWeights> prev_weights;
};

struct RoundResult {
  nn::ParameterVector global;
  AggregationWeights weights;
  std::vector<ClientReport> reports;
};

/// Raw (pre-smoothing) weights for a set of reports under `rule`.
AggregationWeights raw_weights(std::span<const ClientReport> reports, const MethodSpec& method);

/// One communication round. Clients train from the same global model,
/// possibly on `threads` workers; the result does not depend on the
/// scheduling. Rounds are numbered from 1.
RoundResult run_round(const FederationState& state, const MethodSpec& method,
                      const nn::MlpArchitecture& arch, std::span<const data::LocalDataset> clients,
                      std::span<const nn::ClassPriors> priors, std::size_t t,
                      std::uint64_t round_seed, std::size_t threads = 1);

}  // namespace fedism::fed
