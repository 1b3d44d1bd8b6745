#include "fedism/federation.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "fedism/parallel.hpp"
#include "fedism/rng.hpp"

namespace fedism::fed {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

AggregationWeights power_weights(std::span<const double> values, double q, const char* what) {
  require(!values.empty(), std::string(what) + " weights need at least one client");
  require(q > 0.0 && std::isfinite(q), "q must be positive");
  std::vector<double> w(values.size());
  double total = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    require(values[k] >= 0.0 && std::isfinite(values[k]),
            std::string(what) + " values must be finite and nonnegative");
    w[k] = std::pow(values[k], q);
    total += w[k];
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    // Normalise by the maximum first so large q cannot overflow or underflow
    // the sum when at least one value is positive.
    const double peak = *std::max_element(values.begin(), values.end());
    if (peak > 0.0) {
      total = 0.0;
      for (std::size_t k = 0; k < values.size(); ++k) {
        w[k] = std::pow(values[k] / peak, q);
        total += w[k];
      }
    } else {
      std::clog << "warning: all " << what
                << " values are zero; using uniform aggregation weights\n";
      return AggregationWeights(
          std::vector<double>(values.size(), 1.0 / static_cast<double>(values.size())));
    }
  }
  for (auto& v : w) v /= total;
  return AggregationWeights(std::move(w));
}

}  // namespace

void MethodSpec::validate() const {
  require(q > 0.0 && std::isfinite(q), "method.q must be positive");
  require(beta > 0.0 && beta <= 1.0, "method.beta must lie in (0, 1]");
  require(rho > 0.0 && std::isfinite(rho), "method.rho must be positive");
  require(eta >= 0.0 && std::isfinite(eta), "method.eta must be nonnegative");
  require(batch_size >= 1, "method.batch_size must be at least 1");
  require(local_epochs >= 1, "method.local_epochs must be at least 1");
  require(tau >= 0.0 && std::isfinite(tau), "method.tau must be nonnegative");
}

MethodSpec MethodSpec::fedavg() {
  MethodSpec m;
  m.local_rule = LocalRule::plain;
  m.agg_rule = AggRule::size;
  return m;
}

MethodSpec MethodSpec::fedavg_salt() {
  MethodSpec m;
  m.local_rule = LocalRule::sam;
  m.agg_rule = AggRule::size;
  return m;
}

MethodSpec MethodSpec::fedavg_saga() {
  MethodSpec m;
  m.local_rule = LocalRule::plain;
  m.agg_rule = AggRule::sharpness_q;
  return m;
}

MethodSpec MethodSpec::fedism() { return MethodSpec{}; }

std::string method_name(const MethodSpec& m) {
  const bool sam = m.local_rule == LocalRule::sam;
  switch (m.agg_rule) {
    case AggRule::size:
      return sam ? "fedavg+salt" : "fedavg";
    case AggRule::sharpness_q:
      return sam ? "fedism" : "fedavg+saga";
    case AggRule::loss_q:
      return sam ? "fair-loss+salt" : "fair-loss";
  }
  return "unknown";
}

std::unique_ptr<sharpness::LocalUpdateRule> make_update_rule(const MethodSpec& m) {
  if (m.local_rule == LocalRule::sam) return std::make_unique<sharpness::SamUpdate>(m.rho, m.eta);
  return std::make_unique<sharpness::PlainUpdate>(m.eta);
}

bool AggregationWeights::on_simplex(double tol) const {
  if (w.empty()) return false;
  double sum = 0.0;
  for (double v : w) {
    if (!(v >= 0.0) || !std::isfinite(v)) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= tol;
}

ClientReport local_train(const nn::MlpArchitecture& arch, const data::LocalDataset& client,
                         const nn::ParameterVector& global, const MethodSpec& method,
                         const nn::ClassPriors& priors, std::uint64_t round_seed) {
  method.validate();
  if (client.samples.empty()) throw std::invalid_argument("client has no samples");
  if (global.size() != arch.num_params()) {
    throw std::invalid_argument("global parameters do not match the architecture");
  }
  const auto rule = make_update_rule(method);
  nn::ParameterVector params = global;
  const std::size_t n = client.samples.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(round_seed, Stream::local_shuffle, static_cast<std::uint64_t>(client.client_id));
  std::vector<Sample> batch;
  batch.reserve(std::min(method.batch_size, n));
  for (std::size_t epoch = 0; epoch < method.local_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += method.batch_size) {
      const std::size_t stop = std::min(n, start + method.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(client.samples[order[i]]);
      nn::MlpObjective objective(arch, batch, priors, method.tau);
      params = rule->step(objective, params);
    }
  }
  if (!params.all_finite()) {
    throw std::runtime_error("client " + std::to_string(client.client_id) +
                             " produced non-finite parameters");
  }
  ClientReport report;
  report.client_id = client.client_id;
  report.n_samples = n;
  report.sharpness = sharpness::sharpness(arch, params, client.samples, method.rho, priors, method.tau);
  report.mean_loss = report.sharpness.base_loss;
  report.updated_params = std::move(params);
  return report;
}

AggregationWeights fedavg_weights(std::span<const std::size_t> sizes) {
  require(!sizes.empty(), "FedAvg weights need at least one client");
  double total = 0.0;
  for (auto s : sizes) {
    require(s >= 1, "client sizes must be at least 1");
    total += static_cast<double>(s);
  }
  std::vector<double> w(sizes.size());
  for (std::size_t k = 0; k < sizes.size(); ++k) w[k] = static_cast<double>(sizes[k]) / total;
  return AggregationWeights(std::move(w));
}

AggregationWeights sharpness_weights(std::span<const double> sharpness, double q) {
  return power_weights(sharpness, q, "sharpness");
}

AggregationWeights loss_weights(std::span<const double> losses, double q) {
  return power_weights(losses, q, "loss");
}

AggregationWeights smooth_weights(const AggregationWeights& w_tilde,
                                  const std::optional<AggregationWeights>& w_prev, double beta,
                                  std::size_t t) {
  require(t >= 1, "rounds are numbered from 1");
  require(beta > 0.0 && beta <= 1.0, "beta must lie in (0, 1]");
  require(w_tilde.on_simplex(1e-9), "raw weights are not on the simplex");
  if (t == 1) {
    require(!w_prev.has_value(), "round 1 has no previous weights");
    return w_tilde;
  }
  require(w_prev.has_value(), "rounds after the first need the previous weights");
  require(w_prev->size() == w_tilde.size(), "previous weights have a different client count");
  require(w_prev->on_simplex(1e-9), "previous weights are not on the simplex");
  std::vector<double> w(w_tilde.size());
  for (std::size_t k = 0; k < w.size(); ++k) {
    w[k] = beta * w_tilde.w[k] + (1.0 - beta) * w_prev->w[k];
  }
  return AggregationWeights(std::move(w));
}

nn::ParameterVector aggregate(std::span<const ClientReport> reports, const AggregationWeights& w) {
  require(!reports.empty(), "nothing to aggregate");
  require(reports.size() == w.size(), "weight count does not match client count");
  const std::size_t n = reports.front().updated_params.size();
  nn::ParameterVector out(n);
  for (std::size_t k = 0; k < reports.size(); ++k) {
    const auto& p = reports[k].updated_params.values;
    require(p.size() == n, "client parameter vectors differ in length");
    const double wk = w.w[k];
    for (std::size_t i = 0; i < n; ++i) out.values[i] += wk * p[i];
  }
  return out;
}

AggregationWeights raw_weights(std::span<const ClientReport> reports, const MethodSpec& method) {
  std::vector<double> values;
  values.reserve(reports.size());
  switch (method.agg_rule) {
    case AggRule::size: {
      std::vector<std::size_t> sizes;
      for (const auto& r : reports) sizes.push_back(r.n_samples);
      return fedavg_weights(sizes);
    }
    case AggRule::sharpness_q:
      // The first-order estimate can dip below zero on non-convex surfaces.
      for (const auto& r : reports) values.push_back(std::max(r.sharpness.value, 0.0));
      return sharpness_weights(values, method.q);
    case AggRule::loss_q:
      for (const auto& r : reports) values.push_back(std::max(r.mean_loss, 0.0));
      return loss_weights(values, method.q);
  }
  throw std::logic_error("unknown aggregation rule");
}

RoundResult run_round(const FederationState& state, const MethodSpec& method,
                      const nn::MlpArchitecture& arch, std::span<const data::LocalDataset> clients,
                      std::span<const nn::ClassPriors> priors, std::size_t t,
                      std::uint64_t round_seed, std::size_t threads) {
  require(!clients.empty(), "a round needs at least one client");
  require(priors.size() == clients.size(), "one class-prior vector per client is required");
  require(t >= 1, "rounds are numbered from 1");
  RoundResult result;
  result.reports.resize(clients.size());
  parallel_for(clients.size(), threads, [&](std::size_t k) {
    result.reports[k] = local_train(arch, clients[k], state.global, method, priors[k], round_seed);
  });
  auto raw = raw_weights(result.reports, method);
  result.weights = method.agg_rule == AggRule::size
                       ? std::move(raw)
                       : smooth_weights(raw, t == 1 ? std::nullopt : state.prev_weights,
                                        method.beta, t);
  result.global = aggregate(result.reports, result.weights);
  return result;
}

}  // namespace fedism::fed
