#include "fedism/config.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include "fedism/io.hpp"

namespace fedism::config {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double as_real(const std::string& key, const std::string& v) {
  try {
    const double x = io::parse_double(v);
    if (!std::isfinite(x)) throw std::invalid_argument("not finite");
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key, "invalid real for '" + key + "': '" + v + "'");
  }
}

std::size_t as_count(const std::string& key, const std::string& v) {
  long long x = 0;
  try {
    x = io::parse_int(v);
  } catch (const std::exception&) {
    throw ConfigError(key, "invalid integer for '" + key + "': '" + v + "'");
  }
  if (x < 0) throw ConfigError(key, "'" + key + "' must be non-negative");
  return static_cast<std::size_t>(x);
}

std::vector<std::size_t> as_widths(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::string_view rest = v;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto item = trim(rest.substr(0, comma));
    if (!item.empty()) out.push_back(as_count(key, std::string(item)));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

struct Field {
  std::function<void(RunSettings&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunSettings&)> get;
};

std::string count_text(std::size_t v) { return std::to_string(v); }

#define REAL_FIELD(path) \
  Field{[](RunSettings& s, const std::string& k, const std::string& v) { s.path = as_real(k, v); }, \
        [](const RunSettings& s) { return io::format_double(s.path); }}
#define COUNT_FIELD(path) \
  Field{[](RunSettings& s, const std::string& k, const std::string& v) { s.path = as_count(k, v); }, \
        [](const RunSettings& s) { return count_text(s.path); }}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table{
      {"task.classes", COUNT_FIELD(experiment.task.classes)},
      {"task.dim", COUNT_FIELD(experiment.task.dim)},
      {"task.latent_dim", COUNT_FIELD(experiment.task.latent_dim)},
      {"task.n_per_class", COUNT_FIELD(experiment.task.n_per_class)},
      {"task.separation", REAL_FIELD(experiment.task.separation)},
      {"task.ambient_std", REAL_FIELD(experiment.task.ambient_std)},
      {"partition.clients", COUNT_FIELD(experiment.partition.clients)},
      {"partition.alpha", REAL_FIELD(experiment.partition.alpha)},
      {"partition.corrupted_ratio", REAL_FIELD(experiment.partition.corrupted_ratio)},
      {"partition.corruption",
       Field{[](RunSettings&, const std::string& k, const std::string& v) {
               if (v != "gaussian_noise") {
                 throw ConfigError(k, "unknown corruption '" + v + "' for '" + k + "'");
               }
             },
             [](const RunSettings&) { return std::string("gaussian_noise"); }}},
      {"partition.severity", REAL_FIELD(experiment.partition.corruption.severity)},
      {"model.hidden",
       Field{[](RunSettings& s, const std::string& k, const std::string& v) {
               s.experiment.model.hidden = as_widths(k, v);
             },
             [](const RunSettings& s) {
               std::string out;
               for (auto h : s.experiment.model.hidden) {
                 if (!out.empty()) out += ",";
                 out += std::to_string(h);
               }
               return out;
             }}},
      {"model.activation",
       Field{[](RunSettings& s, const std::string& k, const std::string& v) {
               if (v == "relu") {
                 s.experiment.model.activation = nn::Activation::relu;
               } else if (v == "tanh") {
                 s.experiment.model.activation = nn::Activation::tanh;
               } else {
                 throw ConfigError(k, "unknown activation '" + v + "' for '" + k + "'");
               }
             },
             [](const RunSettings& s) {
               return std::string(s.experiment.model.activation == nn::Activation::relu ? "relu"
                                                                                        : "tanh");
             }}},
      {"method.local_rule",
       Field{[](RunSettings& s, const std::string& k, const std::string& v) {
               if (v == "plain") {
                 s.experiment.method.local_rule = fed::LocalRule::plain;
               } else if (v == "sam") {
                 s.experiment.method.local_rule = fed::LocalRule::sam;
               } else {
                 throw ConfigError(k, "unknown local rule '" + v + "' for '" + k + "'");
               }
             },
             [](const RunSettings& s) {
               return std::string(s.experiment.method.local_rule == fed::LocalRule::plain ? "plain"
                                                                                          : "sam");
             }}},
      {"method.agg_rule",
       Field{[](RunSettings& s, const std::string& k, const std::string& v) {
               if (v == "size") {
                 s.experiment.method.agg_rule = fed::AggRule::size;
               } else if (v == "loss_q") {
                 s.experiment.method.agg_rule = fed::AggRule::loss_q;
               } else if (v == "sharpness_q") {
                 s.experiment.method.agg_rule = fed::AggRule::sharpness_q;
               } else {
                 throw ConfigError(k, "unknown aggregation rule '" + v + "' for '" + k + "'");
               }
             },
             [](const RunSettings& s) {
               switch (s.experiment.method.agg_rule) {
                 case fed::AggRule::size: return std::string("size");
                 case fed::AggRule::loss_q: return std::string("loss_q");
                 case fed::AggRule::sharpness_q: break;
               }
               return std::string("sharpness_q");
             }}},
      {"method.q", REAL_FIELD(experiment.method.q)},
      {"method.beta", REAL_FIELD(experiment.method.beta)},
      {"method.rho", REAL_FIELD(experiment.method.rho)},
      {"method.eta", REAL_FIELD(experiment.method.eta)},
      {"method.batch_size", COUNT_FIELD(experiment.method.batch_size)},
      {"method.local_epochs", COUNT_FIELD(experiment.method.local_epochs)},
      {"method.tau", REAL_FIELD(experiment.method.tau)},
      {"experiment.rounds", COUNT_FIELD(experiment.rounds)},
      {"experiment.eval_window", COUNT_FIELD(experiment.eval_window)},
      {"experiment.threads", COUNT_FIELD(experiment.threads)},
      {"experiment.seed",
       Field{[](RunSettings& s, const std::string& k, const std::string& v) {
               s.master_seed = as_count(k, v);
             },
             [](const RunSettings& s) { return std::to_string(s.master_seed); }}},
      {"experiment.num_seeds", COUNT_FIELD(num_seeds)},
  };
  return table;
}

#undef REAL_FIELD
#undef COUNT_FIELD

}  // namespace

KeyValues parse(std::string_view text) {
  KeyValues kv;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("", "line " + std::to_string(line_no) + ": unterminated section header");
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("", "line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError("", "line " + std::to_string(line_no) + ": empty key");
    if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
    kv[key] = std::string(trim(line.substr(eq + 1)));
  }
  return kv;
}

void apply_overrides(KeyValues& kv, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError(o, "override '" + o + "' is not KEY=VALUE");
    kv[std::string(trim(std::string_view(o).substr(0, eq)))] =
        std::string(trim(std::string_view(o).substr(eq + 1)));
  }
}

RunSettings to_settings(const KeyValues& kv) {
  RunSettings s;
  for (const auto& [key, value] : kv) {
    const Field* field = nullptr;
    for (const auto& [name, f] : fields()) {
      if (name == key) field = &f;
    }
    if (field == nullptr) throw ConfigError(key, "unknown config key '" + key + "'");
    field->set(s, key, value);
  }
  if (s.num_seeds < 1) throw ConfigError("experiment.num_seeds", "'experiment.num_seeds' must be at least 1");
  refresh_seeds(s);
  try {
    s.experiment.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("", e.what());
  }
  return s;
}

std::string to_text(const RunSettings& settings) {
  std::string out;
  for (const auto& [name, f] : fields()) out += name + " = " + f.get(settings) + "\n";
  return out;
}

const std::vector<std::string>& schema_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, f] : fields()) k.push_back(name);
    return k;
  }();
  return keys;
}

void refresh_seeds(RunSettings& settings) {
  settings.experiment.seeds.clear();
  for (std::size_t i = 0; i < settings.num_seeds; ++i) {
    settings.experiment.seeds.push_back(settings.master_seed + i);
  }
}

}  // namespace fedism::config
