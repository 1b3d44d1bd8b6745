#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fedism/experiment.hpp"
#include "fedism/rng.hpp"

using namespace fedism;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.task.classes = 3;
  c.task.dim = 6;
  c.task.latent_dim = 2;
  c.task.n_per_class = 60;
  c.partition.clients = 5;
  c.partition.corrupted_ratio = 0.4;
  c.rounds = 6;
  c.eval_window = 3;
  c.seeds = {4, 5};
  return c;
}

}  // namespace

TEST_CASE("config validation") {
  auto c = small_config();
  CHECK_NOTHROW(c.validate());
  c.eval_window = 7;
  CHECK_THROWS(c.validate());
  c = small_config();
  c.seeds.clear();
  CHECK_THROWS(c.validate());
  c = small_config();
  c.model.hidden = {4, 0};
  CHECK_THROWS(c.validate());
  CHECK(small_config().architecture().layer_widths == std::vector<std::size_t>{6, 8, 3});
}

TEST_CASE("one round with a one-round window summarises that round") {
  auto c = small_config();
  c.rounds = 1;
  c.eval_window = 1;
  c.seeds = {3};
  const auto r = run_experiment(c);
  REQUIRE(r.runs.size() == 1);
  REQUIRE(r.runs[0].rounds.size() == 1);
  const auto& m = r.runs[0].rounds[0];
  CHECK(r.summary.mean.at("acc_clean") == m.eval.acc_clean);
  CHECK(r.summary.mean.at("auc_corrupted") == m.eval.auc_corrupted);
  CHECK(r.summary.mean.at("sharpness_std") == m.sharpness_std);
  CHECK(r.summary.std.at("acc_clean") == 0.0);
  CHECK(r.summary.method == "fedism");
}

TEST_CASE("experiment loop equals a hand-composed federation loop") {
  auto c = small_config();
  c.method = fed::MethodSpec::fedavg();
  c.seeds = {9};
  const auto result = run_experiment(c);

  const auto arch = c.architecture();
  const auto data = build_seed_data(c, 9);
  fed::FederationState state{nn::init_params(arch, 9), std::nullopt};
  std::vector<RoundMetrics> rounds;
  for (std::size_t t = 1; t <= c.rounds; ++t) {
    const auto round = fed::run_round(state, c.method, arch, data.clients, data.priors, t,
                                      derive_seed(9, Stream::round, t), 1);
    RoundMetrics m;
    m.round = t;
    m.eval = metrics::evaluate(arch, round.global, data.clean_test, data.corrupted_test);
    m.weights = round.weights;
    double sum = 0.0;
    for (const auto& r : round.reports) sum += r.sharpness.value;
    m.sharpness_mean = sum / static_cast<double>(round.reports.size());
    double var = 0.0;
    for (const auto& r : round.reports) {
      var += (r.sharpness.value - m.sharpness_mean) * (r.sharpness.value - m.sharpness_mean);
    }
    m.sharpness_std = std::sqrt(var / static_cast<double>(round.reports.size()));
    rounds.push_back(m);
    state.global = round.global;
  }
  CHECK(metrics_csv(rounds, c.partition.clients) ==
        metrics_csv(result.runs[0].rounds, c.partition.clients));
}

TEST_CASE("metrics CSV layout") {
  auto c = small_config();
  c.seeds = {1};
  c.rounds = 2;
  c.eval_window = 1;
  const auto csv = metrics_csv(run_experiment(c).runs[0].rounds, c.partition.clients);
  std::istringstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header ==
        "round,acc_clean,auc_clean,acc_corrupted,auc_corrupted,acc_avg,auc_avg,sharpness_mean,"
        "sharpness_std,w_0,w_1,w_2,w_3,w_4");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 13);
  }
  CHECK(rows == 2);
}

TEST_CASE("every round records simplex weights of the method's rule") {
  for (const auto& m : {fed::MethodSpec::fedavg(), fed::MethodSpec::fedism()}) {
    auto c = small_config();
    c.method = m;
    c.seeds = {2};
    const auto run = run_experiment(c).runs[0];
    const auto data = build_seed_data(c, 2);
    std::vector<std::size_t> sizes;
    for (const auto& cl : data.clients) sizes.push_back(cl.size());
    for (const auto& r : run.rounds) {
      CHECK(r.weights.on_simplex());
      for (const auto& [k, v] : window_average({r}, 1)) {
        CHECK(std::isfinite(v));
        if (k.rfind("sharpness", 0) != 0) CHECK((v >= 0.0 && v <= 1.0));
      }
      if (m.agg_rule == fed::AggRule::size) CHECK(r.weights.w == fed::fedavg_weights(sizes).w);
    }
  }
}

TEST_CASE("data are shared across methods and reproducible across thread counts") {
  auto c = small_config();
  c.method = fed::MethodSpec::fedavg();
  const auto a = run_experiment(c);
  c.method = fed::MethodSpec::fedism();
  const auto b = run_experiment(c);
  for (std::size_t i = 0; i < a.runs.size(); ++i) CHECK(a.runs[i].data_hash == b.runs[i].data_hash);

  std::vector<std::string> reference;
  for (const auto& r : b.runs) reference.push_back(metrics_csv(r.rounds, c.partition.clients));
  for (std::size_t threads : {2u, 8u}) {
    c.threads = threads;
    const auto again = run_experiment(c);
    for (std::size_t i = 0; i < again.runs.size(); ++i) {
      CHECK(metrics_csv(again.runs[i].rounds, c.partition.clients) == reference[i]);
    }
  }
}

TEST_CASE("window averaging and summary statistics") {
  std::vector<RoundMetrics> rounds(4);
  for (std::size_t i = 0; i < 4; ++i) {
    rounds[i].round = i + 1;
    rounds[i].eval.acc_clean = 0.1 * static_cast<double>(i + 1);
  }
  CHECK(window_average(rounds, 2).at("acc_clean") == doctest::Approx(0.35));
  CHECK_THROWS(window_average(rounds, 5));
  CHECK_THROWS(window_average(rounds, 0));

  SeedRun a;
  a.rounds = {rounds[0]};
  SeedRun b;
  b.rounds = {rounds[2]};
  const auto s = summarize("x", {a, b}, 1);
  CHECK(s.mean.at("acc_clean") == doctest::Approx(0.2));
  CHECK(s.std.at("acc_clean") == doctest::Approx(0.1));
}
