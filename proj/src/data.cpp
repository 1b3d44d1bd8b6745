#include "fedism/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "fedism/io.hpp"
#include "fedism/rng.hpp"

namespace fedism::data {

namespace {

std::vector<std::vector<double>> draw_centers(const TaskSpec& spec, Rng& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<double>> centers(spec.classes, std::vector<double>(spec.latent_dim));
  for (auto& c : centers) {
    for (auto& v : c) v = unit(rng);
  }
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < spec.classes; ++a) {
    for (std::size_t b = a + 1; b < spec.classes; ++b) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < spec.latent_dim; ++j) {
        const double diff = centers[a][j] - centers[b][j];
        d2 += diff * diff;
      }
      total += std::sqrt(d2);
      ++pairs;
    }
  }
  const double scale = spec.separation / (total / static_cast<double>(pairs));
  for (auto& c : centers) {
    for (auto& v : c) v *= scale;
  }
  return centers;
}

// dim x latent_dim matrix with orthonormal columns (Gram-Schmidt on Gaussian draws).
std::vector<std::vector<double>> draw_embedding(const TaskSpec& spec, Rng& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<double>> cols;
  while (cols.size() < spec.latent_dim) {
    std::vector<double> v(spec.dim);
    for (auto& x : v) x = unit(rng);
    for (const auto& c : cols) {
      double p = 0.0;
      for (std::size_t j = 0; j < spec.dim; ++j) p += c[j] * v[j];
      for (std::size_t j = 0; j < spec.dim; ++j) v[j] -= p * c[j];
    }
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n < 1e-8) continue;
    for (auto& x : v) x /= n;
    cols.push_back(std::move(v));
  }
  return cols;
}

void add_noise(std::vector<double>& x, std::span<const double> train_std, double severity,
               Rng& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  for (std::size_t j = 0; j < x.size(); ++j) x[j] += severity * train_std[j] * unit(rng);
}

void validate(const PartitionSpec& spec) {
  if (spec.clients == 0) throw std::invalid_argument("partition needs at least one client");
  if (!(spec.alpha > 0.0) || !std::isfinite(spec.alpha)) {
    throw std::invalid_argument("Dirichlet concentration must be positive");
  }
  if (!(spec.corrupted_ratio >= 0.0 && spec.corrupted_ratio <= 1.0)) {
    throw std::invalid_argument("corrupted_ratio must lie in [0, 1]");
  }
  if (!std::isfinite(spec.corruption.severity) || spec.corruption.severity < 0.0) {
    throw std::invalid_argument("corruption severity must be finite and nonnegative");
  }
}

}  // namespace

TaskData gen_task(const TaskSpec& spec) {
  if (spec.classes < 2) throw std::invalid_argument("task needs at least 2 classes");
  if (spec.dim < 2) throw std::invalid_argument("task needs at least 2 features");
  if (spec.n_per_class < 10) throw std::invalid_argument("task needs at least 10 samples per class");
  if (spec.latent_dim < 1 || spec.latent_dim > spec.dim) {
    throw std::invalid_argument("latent dimension must lie in [1, dim]");
  }
  if (!(spec.separation > 0.0) || !(spec.ambient_std >= 0.0)) {
    throw std::invalid_argument("separation must be positive and ambient std nonnegative");
  }
  Rng rng = make_rng(spec.seed, Stream::task);
  const auto centers = draw_centers(spec, rng);
  const auto embed = draw_embedding(spec, rng);
  std::normal_distribution<double> unit(0.0, 1.0);

  // Stratified 8:2 split whose train size is exactly ceil(0.8 n).
  const std::size_t n = spec.classes * spec.n_per_class;
  const std::size_t n_train = (8 * n + 9) / 10;
  const std::size_t base = (8 * spec.n_per_class) / 10;
  std::size_t extra = n_train - base * spec.classes;

  TaskData out;
  out.train.reserve(n_train);
  out.test.reserve(n - n_train);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    const std::size_t train_c = base + (extra > 0 ? 1 : 0);
    if (extra > 0) --extra;
    for (std::size_t i = 0; i < spec.n_per_class; ++i) {
      Sample s{std::vector<double>(spec.dim), static_cast<int>(c), kClean};
      for (std::size_t r = 0; r < spec.latent_dim; ++r) {
        const double z = centers[c][r] + unit(rng);
        for (std::size_t j = 0; j < spec.dim; ++j) s.x[j] += z * embed[r][j];
      }
      for (std::size_t j = 0; j < spec.dim; ++j) s.x[j] += spec.ambient_std * unit(rng);
      (i < train_c ? out.train : out.test).push_back(std::move(s));
    }
  }
  Rng split_rng = make_rng(spec.seed, Stream::split);
  std::shuffle(out.train.begin(), out.train.end(), split_rng);
  std::shuffle(out.test.begin(), out.test.end(), split_rng);
  return out;
}

TaskData gen_task(std::size_t classes, std::size_t dim, std::size_t n_per_class,
                  double separation, std::uint64_t seed) {
  TaskSpec spec;
  spec.classes = classes;
  spec.dim = dim;
  spec.n_per_class = n_per_class;
  spec.separation = separation;
  spec.seed = seed;
  return gen_task(spec);
}

std::vector<LocalDataset> dirichlet_partition(std::span<const Sample> train,
                                              const PartitionSpec& spec) {
  validate(spec);
  if (train.empty()) throw std::invalid_argument("cannot partition an empty training set");
  const std::size_t k = spec.clients;
  int classes = 0;
  for (const auto& s : train) classes = std::max(classes, s.y + 1);

  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < train.size(); ++i) {
    by_class[static_cast<std::size_t>(train[i].y)].push_back(i);
  }

  std::size_t empty_client = 0;
  for (int attempt = 0; attempt < kPartitionRetries; ++attempt) {
    Rng rng = make_rng(spec.seed, Stream::partition, static_cast<std::uint64_t>(attempt));
    std::gamma_distribution<double> gamma(spec.alpha, 1.0);
    std::vector<std::size_t> owner(train.size(), 0);
    bool degenerate = false;
    for (const auto& members : by_class) {
      std::vector<double> p(k);
      double sum = 0.0;
      for (auto& v : p) {
        v = gamma(rng);
        sum += v;
      }
      std::vector<std::size_t> idx = members;
      std::shuffle(idx.begin(), idx.end(), rng);
      if (!(sum > 0.0)) {
        degenerate = true;
        break;
      }
      // Cut the shuffled class members at cumulative-proportion boundaries.
      double cum = 0.0;
      std::size_t start = 0;
      for (std::size_t client = 0; client < k; ++client) {
        cum += p[client] / sum;
        std::size_t stop = client + 1 == k
                               ? idx.size()
                               : std::min(idx.size(), static_cast<std::size_t>(std::floor(
                                                          cum * static_cast<double>(idx.size()))));
        stop = std::max(stop, start);
        for (std::size_t i = start; i < stop; ++i) owner[idx[i]] = client;
        start = stop;
      }
    }
    if (degenerate) continue;

    std::vector<LocalDataset> shards(k);
    for (std::size_t client = 0; client < k; ++client) {
      shards[client].client_id = static_cast<int>(client);
    }
    for (std::size_t i = 0; i < train.size(); ++i) shards[owner[i]].samples.push_back(train[i]);
    auto it = std::find_if(shards.begin(), shards.end(), [](const auto& s) { return s.samples.empty(); });
    if (it == shards.end()) return shards;
    empty_client = static_cast<std::size_t>(it - shards.begin());
  }
  throw std::runtime_error("Dirichlet partition failed after " + std::to_string(kPartitionRetries) +
                           " draws: client " + std::to_string(empty_client) +
                           " received no samples");
}

std::vector<double> feature_std(std::span<const Sample> samples) {
  if (samples.empty()) throw std::invalid_argument("feature_std of an empty set");
  const std::size_t d = samples.front().x.size();
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (const auto& s : samples) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += s.x[j];
  }
  for (auto& m : mean) m /= static_cast<double>(samples.size());
  for (const auto& s : samples) {
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = s.x[j] - mean[j];
      var[j] += diff * diff;
    }
  }
  for (auto& v : var) v = std::sqrt(v / static_cast<double>(samples.size()));
  return var;
}

std::size_t corrupted_client_count(const PartitionSpec& spec) {
  return static_cast<std::size_t>(
      std::llround(static_cast<double>(spec.clients) * spec.corrupted_ratio));
}

std::vector<LocalDataset> assign_and_corrupt(std::vector<LocalDataset> shards,
                                             const PartitionSpec& spec,
                                             std::span<const double> train_std) {
  validate(spec);
  const std::size_t m = std::min(corrupted_client_count(spec), shards.size());
  if (m == 0) return shards;
  std::vector<std::size_t> order(shards.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(spec.seed, Stream::corrupt_select);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < m; ++i) {
    auto& shard = shards[order[i]];
    shard.quality = kCorrupted;
    Rng noise = make_rng(spec.seed, Stream::corrupt_client,
                         static_cast<std::uint64_t>(shard.client_id));
    for (auto& s : shard.samples) {
      s.quality = kCorrupted;
      if (s.x.size() != train_std.size()) {
        throw std::invalid_argument("feature std length does not match sample dimension");
      }
      if (spec.corruption.severity > 0.0) add_noise(s.x, train_std, spec.corruption.severity, noise);
    }
  }
  return shards;
}

std::vector<Sample> make_corrupted_test(std::span<const Sample> test, const PartitionSpec& spec,
                                        std::span<const double> train_std) {
  validate(spec);
  std::vector<Sample> out(test.begin(), test.end());
  Rng noise = make_rng(spec.seed, Stream::corrupt_test);
  for (auto& s : out) {
    if (s.x.size() != train_std.size()) {
      throw std::invalid_argument("feature std length does not match sample dimension");
    }
    s.quality = kCorrupted;
    if (spec.corruption.severity > 0.0) add_noise(s.x, train_std, spec.corruption.severity, noise);
  }
  return out;
}

void write_samples(std::ostream& os, std::span<const LocalDataset> shards) {
  for (const auto& shard : shards) {
    for (const auto& s : shard.samples) {
      os << shard.client_id << ',' << s.quality << ',' << s.y;
      for (double v : s.x) os << ',' << io::format_double(v);
      os << '\n';
    }
  }
}

std::vector<LocalDataset> read_samples(std::istream& is) {
  std::vector<LocalDataset> shards;
  std::string line;
  std::size_t lineno = 0;
  std::size_t dim = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() < 4) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": expected at least 4 fields");
    }
    try {
      const int client = static_cast<int>(io::parse_int(fields[0]));
      Sample s;
      s.quality = static_cast<int>(io::parse_int(fields[1]));
      s.y = static_cast<int>(io::parse_int(fields[2]));
      for (std::size_t i = 3; i < fields.size(); ++i) s.x.push_back(io::parse_double(fields[i]));
      if (dim == 0) dim = s.x.size();
      if (s.x.size() != dim) throw std::invalid_argument("inconsistent feature count");
      if (client < 0) throw std::invalid_argument("negative client id");
      auto it = std::find_if(shards.begin(), shards.end(),
                             [&](const auto& d) { return d.client_id == client; });
      if (it == shards.end()) {
        shards.push_back(LocalDataset{{}, client, s.quality});
        it = shards.end() - 1;
      }
      it->samples.push_back(std::move(s));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return shards;
}

std::uint64_t dataset_hash(std::span<const Sample> samples, std::uint64_t h) {
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffU;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& s : samples) {
    mix(static_cast<std::uint64_t>(s.y));
    mix(static_cast<std::uint64_t>(s.quality));
    for (double v : s.x) mix(std::bit_cast<std::uint64_t>(v));
  }
  return h;
}

std::uint64_t dataset_hash(std::span<const LocalDataset> shards) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const auto& shard : shards) h = dataset_hash(shard.samples, h ^ static_cast<std::uint64_t>(shard.client_id));
  return h;
}

}  // namespace fedism::data
