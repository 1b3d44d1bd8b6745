#include "fedism/experiment.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fedism/io.hpp"
#include "fedism/parallel.hpp"
#include "fedism/rng.hpp"

namespace fedism {

namespace {

RoundMetrics record(std::size_t t, const metrics::EvalMetrics& eval,
                    const fed::RoundResult& round) {
  RoundMetrics m;
  m.round = t;
  m.eval = eval;
  m.weights = round.weights;
  const double k = static_cast<double>(round.reports.size());
  double sum = 0.0;
  for (const auto& r : round.reports) {
    m.client_sharpness.push_back(r.sharpness.value);
    sum += r.sharpness.value;
  }
  m.sharpness_mean = sum / k;
  double var = 0.0;
  for (double s : m.client_sharpness) var += (s - m.sharpness_mean) * (s - m.sharpness_mean);
  m.sharpness_std = std::sqrt(var / k);
  return m;
}

MetricMap as_map(const RoundMetrics& r) {
  return {{"acc_clean", r.eval.acc_clean},         {"auc_clean", r.eval.auc_clean},
          {"acc_corrupted", r.eval.acc_corrupted}, {"auc_corrupted", r.eval.auc_corrupted},
          {"acc_avg", r.eval.acc_avg},             {"auc_avg", r.eval.auc_avg},
          {"sharpness_mean", r.sharpness_mean},    {"sharpness_std", r.sharpness_std}};
}

}  // namespace

void ExperimentConfig::validate() const {
  method.validate();
  if (rounds < 1) throw std::invalid_argument("experiment.rounds must be at least 1");
  if (eval_window < 1 || eval_window > rounds) {
    throw std::invalid_argument("experiment.eval_window must lie in [1, rounds]");
  }
  if (seeds.empty()) throw std::invalid_argument("experiment needs at least one seed");
  if (partition.clients < 1) throw std::invalid_argument("partition.clients must be at least 1");
  for (auto h : model.hidden) {
    if (h == 0) throw std::invalid_argument("model.hidden widths must be positive");
  }
}

nn::MlpArchitecture ExperimentConfig::architecture() const {
  std::vector<std::size_t> widths{task.dim};
  widths.insert(widths.end(), model.hidden.begin(), model.hidden.end());
  widths.push_back(task.classes);
  return nn::MlpArchitecture(std::move(widths), model.activation);
}

SeedData build_seed_data(const ExperimentConfig& config, std::uint64_t seed) {
  SeedData out;
  out.seed = seed;
  data::TaskSpec task = config.task;
  task.seed = seed;
  auto generated = data::gen_task(task);
  data::PartitionSpec part = config.partition;
  part.seed = seed;
  const auto train_std = data::feature_std(generated.train);
  out.clients = data::assign_and_corrupt(data::dirichlet_partition(generated.train, part), part,
                                         train_std);
  for (const auto& c : out.clients) {
    out.priors.push_back(nn::ClassPriors::from_labels(c.samples, config.task.classes));
  }
  out.corrupted_test = data::make_corrupted_test(generated.test, part, train_std);
  out.clean_test = std::move(generated.test);
  out.hash = data::dataset_hash(out.clients);
  out.hash = data::dataset_hash(out.clean_test, out.hash);
  out.hash = data::dataset_hash(out.corrupted_test, out.hash);
  return out;
}

SeedRun run_seed(const ExperimentConfig& config, const SeedData& data, std::size_t threads) {
  const auto arch = config.architecture();
  SeedRun run;
  run.seed = data.seed;
  run.data_hash = data.hash;
  fed::FederationState state{nn::init_params(arch, data.seed), std::nullopt};
  for (std::size_t t = 1; t <= config.rounds; ++t) {
    const auto round_seed = derive_seed(data.seed, Stream::round, t);
    auto result = fed::run_round(state, config.method, arch, data.clients, data.priors, t,
                                 round_seed, threads);
    if (!result.global.all_finite()) {
      throw std::runtime_error("seed " + std::to_string(data.seed) + ", round " +
                               std::to_string(t) + ": global model has non-finite parameters");
    }
    const auto eval = metrics::evaluate(arch, result.global, data.clean_test, data.corrupted_test);
    run.rounds.push_back(record(t, eval, result));
    state.global = std::move(result.global);
    state.prev_weights = std::move(result.weights);
  }
  run.final_params = state.global;
  return run;
}

std::vector<std::string> metric_names() {
  return {"acc_clean", "auc_clean",  "acc_corrupted",  "auc_corrupted",
          "acc_avg",   "auc_avg",    "sharpness_mean", "sharpness_std"};
}

MetricMap window_average(const std::vector<RoundMetrics>& rounds, std::size_t window) {
  if (window < 1 || window > rounds.size()) throw std::invalid_argument("bad evaluation window");
  MetricMap avg;
  for (std::size_t i = rounds.size() - window; i < rounds.size(); ++i) {
    for (const auto& [k, v] : as_map(rounds[i])) avg[k] += v;
  }
  for (auto& [k, v] : avg) v /= static_cast<double>(window);
  return avg;
}

ExperimentSummary summarize(const std::string& method, const std::vector<SeedRun>& runs,
                            std::size_t window) {
  ExperimentSummary s;
  s.method = method;
  std::vector<MetricMap> per_seed;
  for (const auto& r : runs) {
    s.seeds.push_back(r.seed);
    per_seed.push_back(window_average(r.rounds, window));
  }
  const double n = static_cast<double>(per_seed.size());
  for (const auto& name : metric_names()) {
    double mean = 0.0;
    for (const auto& m : per_seed) mean += m.at(name);
    mean /= n;
    double var = 0.0;
    for (const auto& m : per_seed) var += (m.at(name) - mean) * (m.at(name) - mean);
    s.mean[name] = mean;
    s.std[name] = std::sqrt(var / n);
  }
  return s;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResult result;
  result.runs.resize(config.seeds.size());
  const std::size_t threads = std::max<std::size_t>(config.threads, 1);
  const std::size_t seed_workers = std::min(threads, config.seeds.size());
  const std::size_t client_threads = std::max<std::size_t>(threads / seed_workers, 1);
  parallel_for(config.seeds.size(), seed_workers, [&](std::size_t i) {
    const auto data = build_seed_data(config, config.seeds[i]);
    result.runs[i] = run_seed(config, data, client_threads);
  });
  result.summary = summarize(fed::method_name(config.method), result.runs, config.eval_window);
  return result;
}

std::string metrics_csv(const std::vector<RoundMetrics>& rounds, std::size_t clients) {
  std::ostringstream os;
  os << "round,acc_clean,auc_clean,acc_corrupted,auc_corrupted,acc_avg,auc_avg,"
        "sharpness_mean,sharpness_std";
  for (std::size_t k = 0; k < clients; ++k) os << ",w_" << k;
  os << '\n';
  for (const auto& r : rounds) {
    os << r.round;
    for (double v : {r.eval.acc_clean, r.eval.auc_clean, r.eval.acc_corrupted,
                     r.eval.auc_corrupted, r.eval.acc_avg, r.eval.auc_avg, r.sharpness_mean,
                     r.sharpness_std}) {
      os << ',' << io::format_double(v);
    }
    for (double w : r.weights.w) os << ',' << io::format_double(w);
    os << '\n';
  }
  return os.str();
}

}  // namespace fedism
