#include "fedism/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "fedism/experiment.hpp"
#include "fedism/io.hpp"
#include "fedism/metrics.hpp"
#include "fedism/rng.hpp"

namespace fedism::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

json summary_json(const ExperimentSummary& s, const std::vector<SeedRun>& runs) {
  json hashes = json::array();
  for (const auto& r : runs) hashes.push_back(r.data_hash);
  return json{{"method", s.method},
              {"seeds", s.seeds},
              {"mean", s.mean},
              {"std", s.std},
              {"data_hashes", hashes}};
}

void write_runs(const ExperimentResult& result, const std::string& method, std::size_t clients,
                const fs::path& out) {
  for (const auto& run : result.runs) {
    const fs::path dir = out / method / std::to_string(run.seed);
    fs::create_directories(dir);
    io::write_file_atomic(dir / "metrics.csv", metrics_csv(run.rounds, clients));
  }
}

void write_resolved(const config::RunSettings& settings, const fs::path& out) {
  fs::create_directories(out);
  io::write_file_atomic(out / "resolved_config", config::to_text(settings));
}

fed::MethodSpec with_rules(fed::MethodSpec base, fed::LocalRule local, fed::AggRule agg) {
  base.local_rule = local;
  base.agg_rule = agg;
  return base;
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

config::RunSettings load_settings(const SettingsSource& source) {
  config::KeyValues kv;
  if (!source.config_path.empty()) {
    std::string text;
    try {
      text = io::read_file(source.config_path);
    } catch (const std::exception& e) {
      throw config::ConfigError("", "cannot read config '" + source.config_path.string() + "'");
    }
    kv = config::parse(text);
  }
  config::apply_overrides(kv, source.overrides);
  if (const char* env = std::getenv("FEDISM_SEED"); env != nullptr && *env != '\0') {
    kv["experiment.seed"] = env;
  }
  if (source.seeds >= 0) kv["experiment.num_seeds"] = std::to_string(source.seeds);
  if (source.threads >= 0) kv["experiment.threads"] = std::to_string(source.threads);
  return config::to_settings(kv);
}

void run_command(const config::RunSettings& settings, const fs::path& out, std::ostream& log) {
  write_resolved(settings, out);
  const auto& cfg = settings.experiment;
  const auto result = run_experiment(cfg);
  const auto method = result.summary.method;
  write_runs(result, method, cfg.partition.clients, out);
  io::write_file_atomic(out / "summary.json", summary_json(result.summary, result.runs).dump(2));
  log << method << ":";
  for (const auto& name : metric_names()) {
    log << ' ' << name << '=' << fixed(result.summary.mean.at(name), 4);
  }
  log << '\n';
}

void ablate_command(const config::RunSettings& settings, const fs::path& out, std::ostream& log) {
  write_resolved(settings, out);
  using fed::AggRule;
  using fed::LocalRule;
  const auto& base = settings.experiment.method;
  const std::vector<fed::MethodSpec> methods{
      with_rules(base, LocalRule::plain, AggRule::size),
      with_rules(base, LocalRule::sam, AggRule::size),
      with_rules(base, LocalRule::plain, AggRule::sharpness_q),
      with_rules(base, LocalRule::sam, AggRule::sharpness_q),
  };
  std::vector<ExperimentResult> results;
  json summaries = json::array();
  for (const auto& m : methods) {
    ExperimentConfig cfg = settings.experiment;
    cfg.method = m;
    results.push_back(run_experiment(cfg));
    const auto& r = results.back();
    write_runs(r, r.summary.method, cfg.partition.clients, out);
    summaries.push_back(summary_json(r.summary, r.runs));
    for (const auto& run : r.runs) {
      log << "data " << r.summary.method << " seed " << run.seed << " hash " << run.data_hash
          << '\n';
    }
  }
  io::write_file_atomic(out / "summary.json", summaries.dump(2));

  const auto& reference = results.front().summary.mean;
  std::string csv = "metric,method,mean,std,delta\n";
  for (const auto& name : metric_names()) {
    for (const auto& r : results) {
      csv += name + "," + r.summary.method + "," + io::format_double(r.summary.mean.at(name)) +
             "," + io::format_double(r.summary.std.at(name)) + "," +
             io::format_double(r.summary.mean.at(name) - reference.at(name)) + "\n";
    }
  }
  io::write_file_atomic(out / "ablation.csv", csv);

  log << std::left << std::setw(14) << "method";
  for (const char* h : {"ACC clean", "AUC clean", "ACC corr", "AUC corr", "dACC corr", "dAUC corr"}) {
    log << std::right << std::setw(11) << h;
  }
  log << '\n';
  for (const auto& r : results) {
    const auto& m = r.summary.mean;
    log << std::left << std::setw(14) << r.summary.method << std::right;
    for (const char* k : {"acc_clean", "auc_clean", "acc_corrupted", "auc_corrupted"}) {
      log << std::setw(11) << fixed(100.0 * m.at(k), 2);
    }
    log << std::setw(11) << fixed(100.0 * (m.at("acc_corrupted") - reference.at("acc_corrupted")), 2)
        << std::setw(11) << fixed(100.0 * (m.at("auc_corrupted") - reference.at("auc_corrupted")), 2)
        << '\n';
  }
}

void sweep_command(const SettingsSource& source, const std::string& param,
                   const std::vector<std::string>& values, const fs::path& out,
                   std::ostream& log) {
  static const std::vector<std::string> allowed{"method.q", "method.beta", "method.rho",
                                                "partition.corrupted_ratio"};
  if (std::find(allowed.begin(), allowed.end(), param) == allowed.end()) {
    throw config::ConfigError(param, "parameter '" + param + "' cannot be swept");
  }
  if (values.empty()) throw config::ConfigError(param, "sweep needs at least one value");
  std::vector<config::RunSettings> points;
  for (const auto& v : values) {
    SettingsSource s = source;
    s.overrides.push_back(param + "=" + v);
    points.push_back(load_settings(s));
  }

  std::string csv = "value,method";
  for (const auto& name : metric_names()) csv += "," + name + "_mean," + name + "_std";
  csv += "\n";
  json summaries = json::array();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const fs::path dir = out / (param + "=" + values[i]);
    write_resolved(points[i], dir);
    const auto result = run_experiment(points[i].experiment);
    write_runs(result, result.summary.method, points[i].experiment.partition.clients, dir);
    io::write_file_atomic(dir / "summary.json",
                          summary_json(result.summary, result.runs).dump(2));
    json entry = summary_json(result.summary, result.runs);
    entry["value"] = values[i];
    summaries.push_back(entry);
    csv += values[i] + "," + result.summary.method;
    for (const auto& name : metric_names()) {
      csv += "," + io::format_double(result.summary.mean.at(name)) + "," +
             io::format_double(result.summary.std.at(name));
    }
    csv += "\n";
    log << param << '=' << values[i] << ": acc_clean="
        << fixed(result.summary.mean.at("acc_clean"), 4)
        << " acc_corrupted=" << fixed(result.summary.mean.at("acc_corrupted"), 4) << '\n';
  }
  fs::create_directories(out);
  io::write_file_atomic(out / "sweep.csv", csv);
  io::write_file_atomic(out / "summary.json", summaries.dump(2));
}

void landscape_command(const config::RunSettings& settings, const fs::path& out, double extent,
                       std::size_t steps, std::ostream& log) {
  write_resolved(settings, out);
  ExperimentConfig cfg = settings.experiment;
  cfg.seeds = {settings.master_seed};
  cfg.validate();
  const auto arch = cfg.architecture();
  const auto data = build_seed_data(cfg, settings.master_seed);
  const auto run = run_seed(cfg, data, std::max<std::size_t>(cfg.threads, 1));

  std::vector<Sample> train;
  for (const auto& c : data.clients) train.insert(train.end(), c.samples.begin(), c.samples.end());
  const auto train_priors = nn::ClassPriors::from_labels(train, cfg.task.classes);
  auto [d1, d2] = metrics::random_directions(arch.num_params(),
                                             derive_seed(settings.master_seed, Stream::landscape, 0));
  const metrics::LandscapeGrid grid{extent, steps};

  auto to_csv = [](const std::vector<metrics::LandscapePoint>& points) {
    std::string csv = "x,y,loss\n";
    for (const auto& p : points) {
      csv += io::format_double(p.x) + "," + io::format_double(p.y) + "," +
             io::format_double(p.loss) + "\n";
    }
    return csv;
  };
  io::write_file_atomic(out / "landscape_train.csv",
                        to_csv(metrics::landscape_slice(arch, run.final_params, train, d1, d2, grid,
                                                        train_priors, cfg.method.tau)));
  io::write_file_atomic(
      out / "landscape_test.csv",
      to_csv(metrics::landscape_slice(arch, run.final_params, data.clean_test, d1, d2, grid,
                                      nn::ClassPriors::uniform(cfg.task.classes), 0.0)));
  log << "landscape written for " << fed::method_name(cfg.method) << " seed "
      << settings.master_seed << '\n';
}

int verify_command(const verify::Options& options, const fs::path& out, std::ostream& log) {
  const auto report = verify::run_all(options);
  fs::create_directories(out);
  io::write_file_atomic(out / "verify_report.txt", report.text());
  log << report.text();
  return report.passed() ? kExitOk : kExitRuntime;
}

int main(int argc, char** argv) {
  CLI::App app{"Sharpness-aware federated learning under attribute-level quality shift"};
  app.require_subcommand(1);

  SettingsSource source;
  std::string config_path;
  std::string out = "out";
  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", config_path, "Config file");
    if (needs_config) opt->check(CLI::ExistingFile);
    sub->add_option("--out", out, "Output directory");
    sub->add_option("--set", source.overrides, "KEY=VALUE override (repeatable)");
    sub->add_option("--seeds", source.seeds, "Number of seeds")->check(CLI::PositiveNumber);
    sub->add_option("--threads", source.threads, "Worker threads")->check(CLI::PositiveNumber);
  };
  auto* run = app.add_subcommand("run", "Run one method over all seeds");
  auto* ablate = app.add_subcommand("ablate", "Run FedAvg, +SALT, +SAGA and FedISM on shared data");
  auto* sweep = app.add_subcommand("sweep", "Run one parameter over a list of values");
  auto* landscape = app.add_subcommand("landscape", "Loss-landscape slices of a trained model");
  auto* verify_cmd = app.add_subcommand("verify", "Run the numerical self-checks");
  for (auto* sub : {run, ablate, sweep, landscape}) add_common(sub, true);
  std::string param;
  std::vector<std::string> values;
  sweep->add_option("--param", param, "Parameter to sweep")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required()->delimiter(',');
  double extent = 1.0;
  std::size_t steps = 21;
  landscape->add_option("--extent", extent, "Half-width of the grid");
  landscape->add_option("--steps", steps, "Points per axis")->check(CLI::PositiveNumber);
  verify_cmd->add_option("--out", out, "Output directory");
  std::uint64_t verify_seed = 0;
  verify_cmd->add_option("--seed", verify_seed, "Seed for the random instances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  source.config_path = config_path;
  try {
    if (*verify_cmd) {
      verify::Options options;
      options.seed = verify_seed;
      return verify_command(options, out, std::cout);
    }
    if (*sweep) {
      sweep_command(source, param, values, out, std::cout);
      return kExitOk;
    }
    const auto settings = load_settings(source);
    if (*run) run_command(settings, out, std::cout);
    if (*ablate) ablate_command(settings, out, std::cout);
    if (*landscape) landscape_command(settings, out, extent, steps, std::cout);
    return kExitOk;
  } catch (const config::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace fedism::cli
