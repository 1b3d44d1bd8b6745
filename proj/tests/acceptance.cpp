#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <unistd.h>

#include "fedism/cli.hpp"
#include "fedism/config.hpp"
#include "fedism/experiment.hpp"
#include "fedism/io.hpp"
#include "fedism/minimax.hpp"
#include "fedism/rng.hpp"
#include "fedism/sharpness.hpp"
#include "fedism/verify.hpp"

using namespace fedism;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

config::RunSettings base_settings() {
  return config::to_settings(config::parse(io::read_file(FEDISM_DEFAULT_CONFIG)));
}

ExperimentConfig with_method(ExperimentConfig c, fed::LocalRule local, fed::AggRule agg) {
  c.method.local_rule = local;
  c.method.agg_rule = agg;
  return c;
}

double paper_setup_seconds = 0.0;

// Shared runs for the directional criteria, keyed by method name.
std::map<std::string, ExperimentResult>& paper_setup_runs() {
  static std::map<std::string, ExperimentResult> runs = [] {
    const auto t0 = Clock::now();
    const auto base = base_settings().experiment;
    std::map<std::string, ExperimentResult> out;
    using fed::AggRule;
    using fed::LocalRule;
    for (auto [local, agg] : {std::pair{LocalRule::plain, AggRule::size},
                              {LocalRule::sam, AggRule::size},
                              {LocalRule::plain, AggRule::sharpness_q},
                              {LocalRule::sam, AggRule::sharpness_q}}) {
      auto r = run_experiment(with_method(base, local, agg));
      out.emplace(r.summary.method, std::move(r));
    }
    paper_setup_seconds = seconds_since(t0);
    return out;
  }();
  return runs;
}

double mean_metric(const std::string& method, const std::string& metric) {
  return paper_setup_runs().at(method).summary.mean.at(metric);
}

// 1
Outcome gradient_oracle() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  const std::size_t n = 100;
  for (std::size_t i = 0; i < n; ++i) {
    const auto inst = verify::random_instance(derive_seed(2024, Stream::verify, i),
                                              i % 2 ? nn::Activation::relu : nn::Activation::tanh);
    const auto g = nn::batch_loss_and_grad(inst.arch, inst.params, inst.batch, inst.priors, inst.tau);
    const auto fd = nn::finite_diff_grad(inst.arch, inst.params, inst.batch, inst.priors, inst.tau, 1e-5);
    double scale = 1e-12;
    for (double v : fd.values) scale = std::max(scale, std::abs(v));
    for (std::size_t j = 0; j < fd.values.size(); ++j) {
      worst = std::max(worst, std::abs(g.grad.values[j] - fd.values[j]) / scale);
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 30.0, std::to_string(n) + " instances, max rel err " + sci(worst) +
                                           " (< 1e-4), " + num(secs, 2) + " s (< 30 s)"};
}

// 2
Outcome first_order_law() {
  double worst_ratio_dev = 0.0;
  double worst_shrink = 1e300;
  const std::size_t n = 50;
  for (std::size_t i = 0; i < n; ++i) {
    const auto inst =
        verify::random_instance(derive_seed(4048, Stream::verify, i), nn::Activation::tanh);
    const double gnorm =
        nn::batch_loss_and_grad(inst.arch, inst.params, inst.batch, inst.priors, inst.tau).grad.norm();
    auto s = [&](double rho) {
      return sharpness::sharpness(inst.arch, inst.params, inst.batch, rho, inst.priors, inst.tau).value;
    };
    worst_ratio_dev = std::max(worst_ratio_dev, std::abs(s(1e-4) / (1e-4 * gnorm) - 1.0));
    const double coarse = std::abs(s(1e-3) - 1e-3 * gnorm);
    const double fine = std::abs(s(1e-4) - 1e-4 * gnorm);
    worst_shrink = std::min(worst_shrink, coarse / fine);
  }
  return {worst_ratio_dev <= 0.01 && worst_shrink >= 5.0,
          std::to_string(n) + " instances, max |S/(rho|g|) - 1| at rho=1e-4 " + sci(worst_ratio_dev) +
              " (<= 0.01), min gap shrink rho 1e-3 -> 1e-4 " + num(worst_shrink, 1) + "x (>= 5x)"};
}

// 3
Outcome closed_form() {
  struct Quadratic final : nn::Objective {
    std::size_t dimension() const override { return 1; }
    double loss(std::span<const double> p) const override { return 0.5 * p[0] * p[0]; }
    nn::LossAndGrad loss_and_grad(std::span<const double> p) const override {
      return {loss(p), nn::GradientVector{std::vector<double>{p[0]}}};
    }
  };
  struct Linear final : nn::Objective {
    double a;
    explicit Linear(double a) : a(a) {}
    std::size_t dimension() const override { return 1; }
    double loss(std::span<const double> p) const override { return a * p[0]; }
    nn::LossAndGrad loss_and_grad(std::span<const double> p) const override {
      return {loss(p), nn::GradientVector{std::vector<double>{a}}};
    }
  };
  const double quad = sharpness::sharpness(Quadratic{}, nn::ParameterVector{std::vector<double>{1.0}}, 0.1, 1).value;
  bool linear_exact = true;
  for (double a : {-2.5, 0.5, 4.0}) {
    for (double rho : {0.25, 0.125}) {
      const double s = sharpness::sharpness(Linear{a}, nn::ParameterVector{std::vector<double>{0.75}}, rho, 1).value;
      linear_exact = linear_exact && s == rho * std::abs(a);
    }
  }
  return {std::abs(quad - 0.105) <= 1e-12 && linear_exact,
          "quadratic S = " + io::format_double(quad) + " (0.105 +- 1e-12), linear S == rho|a| " +
              (linear_exact ? "exact" : "NOT exact")};
}

// 4
Outcome weight_laws() {
  const auto simplex = verify::simplex_check(verify::Options{});
  double recorded = 0.0;
  for (const auto& [name, result] : paper_setup_runs()) {
    for (const auto& run : result.runs) {
      for (const auto& r : run.rounds) {
        double sum = 0.0;
        for (double w : r.weights.w) {
          sum += w;
          if (w < 0.0) recorded = std::max(recorded, -w);
        }
        recorded = std::max(recorded, std::abs(sum - 1.0));
      }
    }
  }
  const auto w = fed::sharpness_weights(std::vector<double>{1.0, 2.0}, 2.0);
  const bool pair = std::abs(w.w[0] - 0.2) <= 1e-12 && std::abs(w.w[1] - 0.8) <= 1e-12;
  const double conc = fed::sharpness_weights(std::vector<double>{1.0, 2.0, 3.0}, 50.0).w[2];
  const auto sm = fed::smooth_weights(fed::AggregationWeights({0.6, 0.4}),
                                      fed::AggregationWeights({0.2, 0.8}), 0.5, 2);
  const bool smooth = std::abs(sm.w[0] - 0.4) <= 1e-12 && std::abs(sm.w[1] - 0.6) <= 1e-12;
  const fed::AggregationWeights first({0.3, 0.7});
  const bool t1 = fed::smooth_weights(first, std::nullopt, 0.5, 1).w == first.w;
  const bool ok = simplex.passed && recorded <= 1e-12 && pair && conc > 0.999 && smooth && t1;
  return {ok, "simplex violation random " + sci(simplex.measured) + ", recorded " + sci(recorded) +
                  " (<= 1e-12); [1,2],q=2 -> [" + num(w.w[0], 3) + "," + num(w.w[1], 3) +
                  "]; q=50 max weight " + num(conc, 6) + " (> 0.999); smoothing [" + num(sm.w[0], 3) +
                  "," + num(sm.w[1], 3) + "]; t=1 unchanged " + (t1 ? "yes" : "no")};
}

// 5
Outcome minimax() {
  const auto t0 = Clock::now();
  verify::Options o;
  o.seed = 7;
  o.minimax_instances = 200;
  const auto c = verify::minimax_check(o);
  const double secs = seconds_since(t0);
  return {c.passed && secs < 60.0, "200 instances (K<=4, A=2, M<=5, grid 0.01), max value gap " +
                                       sci(c.measured) + " (<= 1e-2), " + c.detail + ", " +
                                       num(secs, 2) + " s (< 60 s)"};
}

// 6
Outcome headline_trend() {
  paper_setup_runs();
  const double secs = paper_setup_seconds;
  const double gain = 100.0 * (mean_metric("fedism", "acc_corrupted") - mean_metric("fedavg", "acc_corrupted"));
  const double clean_drop = 100.0 * (mean_metric("fedavg", "acc_clean") - mean_metric("fedism", "acc_clean"));
  return {gain >= 3.0 && clean_drop <= 2.0 && secs < 300.0,
          "corrupted ACC FedISM " + num(100 * mean_metric("fedism", "acc_corrupted"), 2) + " vs FedAvg " +
              num(100 * mean_metric("fedavg", "acc_corrupted"), 2) + " (gain " + num(gain, 2) +
              " pts, need >= 3); clean drop " + num(clean_drop, 2) + " pts (<= 2); four methods in " +
              num(secs, 1) + " s"};
}

// 7
Outcome ablation_ordering() {
  constexpr double tie = 0.005;
  bool ok = true;
  std::string detail;
  for (const char* metric : {"acc_corrupted", "acc_clean"}) {
    const double avg = mean_metric("fedavg", metric);
    const double salt = mean_metric("fedavg+salt", metric);
    const double saga = mean_metric("fedavg+saga", metric);
    const double ism = mean_metric("fedism", metric);
    ok = ok && ism >= saga - tie && saga >= avg - tie && salt >= avg - tie;
    detail += std::string(metric) + ": fedism " + num(100 * ism, 2) + ", +saga " + num(100 * saga, 2) +
              ", +salt " + num(100 * salt, 2) + ", fedavg " + num(100 * avg, 2) + "; ";
  }
  return {ok, detail + "ties within 0.5 pts"};
}

// 8
Outcome sharpness_uniformity() {
  const auto& avg = paper_setup_runs().at("fedavg").runs;
  const auto& ism = paper_setup_runs().at("fedism").runs;
  int wins = 0;
  std::string detail;
  for (std::size_t i = 0; i < avg.size(); ++i) {
    const double a = avg[i].rounds.back().sharpness_std;
    const double b = ism[i].rounds.back().sharpness_std;
    wins += b < a;
    detail += "seed " + std::to_string(avg[i].seed) + ": " + sci(b) + " vs " + sci(a) + "; ";
  }
  return {wins >= 2, detail + "FedISM lower in " + std::to_string(wins) + "/3 (need >= 2)"};
}

// 9
Outcome ratio_sweep() {
  bool ok = true;
  std::string detail;
  for (double ratio : {0.1, 0.2, 0.3}) {
    double avg = 0.0;
    double ism = 0.0;
    if (ratio == 0.2) {
      avg = mean_metric("fedavg", "acc_corrupted");
      ism = mean_metric("fedism", "acc_corrupted");
    } else {
      auto c = base_settings().experiment;
      c.partition.corrupted_ratio = ratio;
      avg = run_experiment(with_method(c, fed::LocalRule::plain, fed::AggRule::size)).summary.mean.at("acc_corrupted");
      ism = run_experiment(with_method(c, fed::LocalRule::sam, fed::AggRule::sharpness_q)).summary.mean.at("acc_corrupted");
    }
    ok = ok && ism >= avg;
    detail += "ratio " + num(ratio, 1) + ": " + num(100 * ism, 2) + " vs " + num(100 * avg, 2) + "; ";
  }
  return {ok, detail + "FedISM >= FedAvg at every ratio"};
}

// 10
Outcome determinism() {
  const auto root = fs::temp_directory_path() / ("fedism_acceptance_" + std::to_string(::getpid()));
  std::map<std::size_t, std::map<std::string, std::string>> files;
  std::ostringstream log;
  for (std::size_t threads : {1u, 2u, 8u}) {
    auto s = base_settings();
    s.experiment.threads = threads;
    const auto out = root / std::to_string(threads);
    cli::run_command(s, out, log);
    for (const auto& entry : fs::recursive_directory_iterator(out)) {
      if (entry.path().filename() == "metrics.csv") {
        files[threads][fs::relative(entry.path(), out).string()] = io::read_file(entry.path());
      }
    }
  }
  fs::remove_all(root);
  const bool ok = !files[1].empty() && files[1] == files[2] && files[1] == files[8];
  return {ok, std::to_string(files[1].size()) + " metrics.csv files compared byte-for-byte across 1, 2, 8 threads"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient oracle", gradient_oracle},
      {"first-order sharpness law", first_order_law},
      {"closed-form sharpness", closed_form},
      {"aggregation weight laws", weight_laws},
      {"client/attribute minimax equivalence", minimax},
      {"corrupted-accuracy gain over FedAvg", headline_trend},
      {"ablation ordering", ablation_ordering},
      {"sharpness uniformity", sharpness_uniformity},
      {"corrupted-ratio sweep", ratio_sweep},
      {"thread-count determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].first << ": "
              << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
