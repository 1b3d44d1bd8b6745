#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fedism/data.hpp"
#include "fedism/federation.hpp"
#include "fedism/metrics.hpp"
#include "fedism/nn.hpp"

namespace fedism {

struct ModelSpec {
  std::vector<std::size_t> hidden{8};
  nn::Activation activation = nn::Activation::relu;
};

struct ExperimentConfig {
  data::TaskSpec task;
  data::PartitionSpec partition;
  fed::MethodSpec method;
  ModelSpec model;
  std::size_t rounds = 100;
  std::size_t eval_window = 5;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::size_t threads = 1;

  void validate() const;
  nn::MlpArchitecture architecture() const;
};

struct RoundMetrics {
  std::size_t round = 0;
  metrics::EvalMetrics eval;
  double sharpness_mean = 0.0;
  double sharpness_std = 0.0;
  fed::AggregationWeights weights;
  /// Per-client raw sharpness and client quality, for diagnostics.
  std::vector<double> client_sharpness;
};

/// Every input one seed of an experiment runs on.
struct SeedData {
  std::uint64_t seed = 0;
  std::vector<data::LocalDataset> clients;
  std::vector<nn::ClassPriors> priors;
  std::vector<Sample> clean_test;
  std::vector<Sample> corrupted_test;
  std::uint64_t hash = 0;
};

struct SeedRun {
  std::uint64_t seed = 0;
  std::uint64_t data_hash = 0;
  std::vector<RoundMetrics> rounds;
  nn::ParameterVector final_params;
};

/// Metric name -> value, for the eight reported quantities.
using MetricMap = std::map<std::string, double>;

struct ExperimentSummary {
  std::string method;
  std::vector<std::uint64_t> seeds;
  MetricMap mean;
  MetricMap std;
};

struct ExperimentResult {
  std::vector<SeedRun> runs;
  ExperimentSummary summary;
};

/// Builds the task, partition, corruption and class priors for one seed. The
/// same (config.task, config.partition, seed) always yields the same data,
/// independent of the method.
SeedData build_seed_data(const ExperimentConfig& config, std::uint64_t seed);

/// Runs `rounds` federated rounds on prepared data and records metrics.
SeedRun run_seed(const ExperimentConfig& config, const SeedData& data, std::size_t threads);

/// Runs every seed (in parallel when threads > 1) and summarises the
/// last `eval_window` rounds of each.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Mean over the last `window` rounds of each reported metric.
MetricMap window_average(const std::vector<RoundMetrics>& rounds, std::size_t window);

ExperimentSummary summarize(const std::string& method, const std::vector<SeedRun>& runs,
                            std::size_t window);

std::vector<std::string> metric_names();

std::string metrics_csv(const std::vector<RoundMetrics>& rounds, std::size_t clients);

}  // namespace fedism
