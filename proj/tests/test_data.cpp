#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "fedism/data.hpp"

using namespace fedism;
using namespace fedism::data;

namespace {

std::vector<Sample> flatten(const std::vector<LocalDataset>& shards) {
  std::vector<Sample> out;
  for (const auto& s : shards) out.insert(out.end(), s.samples.begin(), s.samples.end());
  return out;
}

bool sample_less(const Sample& a, const Sample& b) {
  return std::tie(a.y, a.x) < std::tie(b.y, b.x);
}

double mean_tv_to_global(const std::vector<LocalDataset>& shards, std::size_t classes) {
  std::vector<double> global(classes, 0.0);
  double total = 0.0;
  for (const auto& s : shards) {
    for (const auto& x : s.samples) global[x.y] += 1.0;
    total += static_cast<double>(s.size());
  }
  for (auto& g : global) g /= total;
  double tv = 0.0;
  for (const auto& s : shards) {
    std::vector<double> h(classes, 0.0);
    for (const auto& x : s.samples) h[x.y] += 1.0 / static_cast<double>(s.size());
    double d = 0.0;
    for (std::size_t c = 0; c < classes; ++c) d += std::abs(h[c] - global[c]);
    tv += 0.5 * d;
  }
  return tv / static_cast<double>(shards.size());
}

}  // namespace

TEST_CASE("task generation sizes, balance and determinism") {
  const auto a = gen_task(3, 6, 11, 4.0, 5);
  CHECK(a.train.size() == 27);  // ceil(0.8 * 33)
  CHECK(a.test.size() == 6);
  std::map<int, int> counts;
  for (const auto& s : a.train) counts[s.y]++;
  for (const auto& s : a.test) counts[s.y]++;
  for (int c = 0; c < 3; ++c) CHECK(counts[c] == 11);
  for (const auto& s : a.train) {
    CHECK(s.x.size() == 6);
    CHECK(s.quality == kClean);
  }
  const auto b = gen_task(3, 6, 11, 4.0, 5);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK_FALSE(gen_task(3, 6, 11, 4.0, 6).train == a.train);
}

TEST_CASE("task generation rejects invalid sizes") {
  CHECK_THROWS(gen_task(1, 6, 20, 1.0, 0));
  CHECK_THROWS(gen_task(3, 1, 20, 1.0, 0));
  CHECK_THROWS(gen_task(3, 6, 9, 1.0, 0));
  TaskSpec spec;
  spec.latent_dim = spec.dim + 1;
  CHECK_THROWS(gen_task(spec));
}

TEST_CASE("widely separated classes are linearly separable") {
  const auto task = gen_task(5, 20, 200, 60.0, 1);
  const std::size_t d = 20;
  auto design = [&](const std::vector<Sample>& s) {
    Eigen::MatrixXd x(s.size(), d + 1);
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (std::size_t j = 0; j < d; ++j) x(i, j) = s[i].x[j];
      x(i, d) = 1.0;
    }
    return x;
  };
  const Eigen::MatrixXd x = design(task.train);
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(task.train.size(), 5);
  for (std::size_t i = 0; i < task.train.size(); ++i) y(i, task.train[i].y) = 1.0;
  const Eigen::MatrixXd w = x.colPivHouseholderQr().solve(y);
  const Eigen::MatrixXd scores = design(task.test) * w;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < task.test.size(); ++i) {
    Eigen::Index best = 0;
    scores.row(i).maxCoeff(&best);
    if (best == task.test[i].y) ++correct;
  }
  CHECK(static_cast<double>(correct) / task.test.size() > 0.99);
}

TEST_CASE("single-client partition returns the training set") {
  const auto task = gen_task(4, 5, 30, 3.0, 2);
  PartitionSpec spec;
  spec.clients = 1;
  const auto shards = dirichlet_partition(task.train, spec);
  REQUIRE(shards.size() == 1);
  CHECK(shards[0].samples == task.train);
  CHECK(shards[0].client_id == 0);
}

TEST_CASE("partition conserves the training multiset") {
  const auto task = gen_task(5, 4, 60, 3.0, 3);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    PartitionSpec spec;
    spec.clients = 7;
    spec.alpha = 0.5;
    spec.seed = seed;
    const auto shards = dirichlet_partition(task.train, spec);
    REQUIRE(shards.size() == 7);
    for (const auto& s : shards) CHECK_FALSE(s.samples.empty());
    auto joined = flatten(shards);
    auto expected = task.train;
    std::sort(joined.begin(), joined.end(), sample_less);
    std::sort(expected.begin(), expected.end(), sample_less);
    CHECK(joined == expected);
    CHECK(dirichlet_partition(task.train, spec) == shards);
  }
}

TEST_CASE("paper-sized partition has skewed class histograms") {
  const auto task = gen_task(5, 20, 500, 3.0, 0);
  PartitionSpec spec;
  spec.clients = 20;
  spec.alpha = 1.0;
  const auto shards = dirichlet_partition(task.train, spec);
  CHECK(mean_tv_to_global(shards, 5) > 0.1);
}

TEST_CASE("smaller concentration gives stronger label skew") {
  const auto task = gen_task(5, 4, 200, 3.0, 0);
  double skewed = 0.0;
  double flat = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    PartitionSpec spec;
    spec.clients = 10;
    spec.seed = seed;
    spec.alpha = 0.1;
    skewed += mean_tv_to_global(dirichlet_partition(task.train, spec), 5);
    spec.alpha = 100.0;
    flat += mean_tv_to_global(dirichlet_partition(task.train, spec), 5);
  }
  CHECK(skewed > flat);
}

TEST_CASE("partition fails loudly when clients cannot all be filled") {
  const auto task = gen_task(2, 3, 10, 3.0, 0);
  PartitionSpec spec;
  spec.clients = 100;
  CHECK_THROWS_WITH_AS(dirichlet_partition(task.train, spec), doctest::Contains("client"),
                       std::runtime_error);
}

TEST_CASE("corruption selection and locality") {
  const auto task = gen_task(5, 8, 100, 3.0, 4);
  PartitionSpec spec;
  spec.clients = 10;
  spec.corrupted_ratio = 0.2;
  spec.seed = 9;
  const auto shards = dirichlet_partition(task.train, spec);
  const auto std_dev = feature_std(task.train);
  const auto out = assign_and_corrupt(shards, spec, std_dev);
  CHECK(corrupted_client_count(spec) == 2);
  std::size_t corrupted = 0;
  for (std::size_t k = 0; k < out.size(); ++k) {
    for (const auto& s : out[k].samples) CHECK(s.quality == out[k].quality);
    if (out[k].quality == kCorrupted) {
      ++corrupted;
      CHECK(out[k].samples.size() == shards[k].samples.size());
      CHECK(out[k].samples[0].x != shards[k].samples[0].x);
    } else {
      CHECK(out[k] == shards[k]);
    }
  }
  CHECK(corrupted == 2);

  spec.corrupted_ratio = 0.0;
  CHECK(assign_and_corrupt(shards, spec, std_dev) == shards);

  spec.corrupted_ratio = 0.5;
  spec.corruption.severity = 0.0;
  const auto flagged = assign_and_corrupt(shards, spec, std_dev);
  std::size_t flagged_count = 0;
  for (std::size_t k = 0; k < flagged.size(); ++k) {
    for (std::size_t i = 0; i < flagged[k].size(); ++i) {
      CHECK(flagged[k].samples[i].x == shards[k].samples[i].x);
    }
    flagged_count += flagged[k].quality == kCorrupted;
  }
  CHECK(flagged_count == 5);
}

TEST_CASE("noise standard deviation follows the per-feature training std") {
  TaskSpec task_spec;
  task_spec.n_per_class = 2000;
  const auto task = gen_task(task_spec);
  PartitionSpec spec;
  spec.clients = 1;
  spec.corrupted_ratio = 1.0;
  const auto shards = dirichlet_partition(task.train, spec);
  const auto std_dev = feature_std(task.train);
  const auto out = assign_and_corrupt(shards, spec, std_dev);
  const auto test_noisy = make_corrupted_test(task.test, spec, std_dev);
  auto check_noise = [&](const std::vector<Sample>& clean, const std::vector<Sample>& noisy) {
    for (std::size_t j = 0; j < std_dev.size(); ++j) {
      double m = 0.0;
      double m2 = 0.0;
      for (std::size_t i = 0; i < clean.size(); ++i) {
        const double e = noisy[i].x[j] - clean[i].x[j];
        m += e;
        m2 += e * e;
      }
      const double n = static_cast<double>(clean.size());
      const double sd = std::sqrt(m2 / n - (m / n) * (m / n));
      CHECK(std::abs(sd / std_dev[j] - 1.0) < 0.05);
    }
  };
  check_noise(shards[0].samples, out[0].samples);
  check_noise(task.test, test_noisy);
}

TEST_CASE("corrupted test set") {
  const auto task = gen_task(3, 5, 50, 3.0, 8);
  PartitionSpec spec;
  const auto std_dev = feature_std(task.train);
  const auto noisy = make_corrupted_test(task.test, spec, std_dev);
  CHECK(noisy == make_corrupted_test(task.test, spec, std_dev));
  CHECK(noisy.size() == task.test.size());
  for (const auto& s : noisy) CHECK(s.quality == kCorrupted);
  spec.corruption.severity = 0.0;
  const auto same = make_corrupted_test(task.test, spec, std_dev);
  for (std::size_t i = 0; i < same.size(); ++i) {
    CHECK(same[i].x == task.test[i].x);
    CHECK(same[i].y == task.test[i].y);
  }
}

TEST_CASE("sample text format round-trips exactly") {
  const auto task = gen_task(3, 4, 12, 2.0, 1);
  PartitionSpec spec;
  spec.clients = 3;
  spec.corrupted_ratio = 1.0 / 3.0;
  const auto shards = assign_and_corrupt(dirichlet_partition(task.train, spec), spec,
                                         feature_std(task.train));
  std::stringstream ss;
  write_samples(ss, shards);
  const auto back = read_samples(ss);
  CHECK(back == shards);
  CHECK(dataset_hash(back) == dataset_hash(shards));
  std::istringstream bad("0,0,1,notanumber\n");
  CHECK_THROWS(read_samples(bad));
}
