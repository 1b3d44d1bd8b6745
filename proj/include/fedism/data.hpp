#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fedism/sample.hpp"

namespace fedism::data {

inline constexpr int kClean = 0;
inline constexpr int kCorrupted = 1;

struct LocalDataset {
  std::vector<Sample> samples;
  int client_id = 0;
  int quality = kClean;

  std::size_t size() const { return samples.size(); }
  bool operator==(const LocalDataset&) const = default;
};

/// Shape of the synthetic classification task.
///
/// Each class is a Gaussian cluster in a `latent_dim`-dimensional latent
/// space (unit within-class std, centers rescaled so the mean pairwise center
/// distance equals `separation`). Samples are embedded into `dim` features by
/// a random matrix with orthonormal columns, which preserves those distances,
/// plus a small isotropic `ambient_std`. Clean data therefore occupies a thin
/// slab around a low-dimensional subspace, while additive feature noise also
/// fills the directions a clean-trained model never sees.
struct TaskSpec {
  std::size_t classes = 5;
  std::size_t dim = 20;
  std::size_t latent_dim = 3;
  std::size_t n_per_class = 500;
  double separation = 7.0;
  double ambient_std = 0.02;
  std::uint64_t seed = 0;
};

struct TaskData {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

enum class CorruptionKind { gaussian_noise };

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::gaussian_noise;
  /// Noise standard deviation as a multiple of the per-feature training std.
  double severity = 1.0;
};

struct PartitionSpec {
  std::size_t clients = 20;
  double alpha = 1.0;
  double corrupted_ratio = 0.2;
  CorruptionSpec corruption;
  std::uint64_t seed = 0;
};

inline constexpr int kPartitionRetries = 100;

TaskData gen_task(const TaskSpec& spec);

/// Convenience overload matching the plain (C, d, n, separation, seed) form.
TaskData gen_task(std::size_t classes, std::size_t dim, std::size_t n_per_class,
                  double separation, std::uint64_t seed);

std::vector<LocalDataset> dirichlet_partition(std::span<const Sample> train,
                                              const PartitionSpec& spec);

/// Per-feature standard deviation (population form) over a sample set.
std::vector<double> feature_std(std::span<const Sample> samples);

std::size_t corrupted_client_count(const PartitionSpec& spec);

/// Marks round(K * corrupted_ratio) clients, chosen by a seeded shuffle, as
/// corrupted and adds i.i.d. Gaussian noise with std = severity * train_std to
/// every feature of their samples. Clean clients are returned untouched.
std::vector<LocalDataset> assign_and_corrupt(std::vector<LocalDataset> shards,
                                             const PartitionSpec& spec,
                                             std::span<const double> train_std);

std::vector<Sample> make_corrupted_test(std::span<const Sample> test, const PartitionSpec& spec,
                                        std::span<const double> train_std);

/// Line format: client_id,quality,y,x_0,...,x_{d-1}; reals in shortest
/// round-trip decimal form.
void write_samples(std::ostream& os, std::span<const LocalDataset> shards);
std::vector<LocalDataset> read_samples(std::istream& is);

/// FNV-1a over labels, qualities and feature bits; identifies a dataset in logs.
std::uint64_t dataset_hash(std::span<const LocalDataset> shards);
std::uint64_t dataset_hash(std::span<const Sample> samples, std::uint64_t h = 14695981039346656037ULL);

}  // namespace fedism::data
