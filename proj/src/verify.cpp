#include "fedism/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "fedism/federation.hpp"
#include "fedism/io.hpp"
#include "fedism/minimax.hpp"
#include "fedism/rng.hpp"
#include "fedism/sharpness.hpp"

namespace fedism::verify {

namespace {

GradientFn gradient_or_default(const Options& options) {
  if (options.gradient) return options.gradient;
  return [](const nn::MlpArchitecture& arch, const nn::ParameterVector& params,
            std::span<const Sample> batch, const nn::ClassPriors& priors, double tau) {
    return nn::batch_loss_and_grad(arch, params, batch, priors, tau);
  };
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Deviation of S from rho * ||g|| for one instance; `ratio` receives S / (rho ||g||).
double first_order_gap(const MlpInstance& inst, const GradientFn& grad, double rho,
                       double* ratio) {
  const auto s = sharpness::sharpness(inst.arch, inst.params, inst.batch, rho, inst.priors,
                                      inst.tau);
  const double predicted =
      rho * grad(inst.arch, inst.params, inst.batch, inst.priors, inst.tau).grad.norm();
  if (ratio != nullptr) *ratio = predicted > 0.0 ? s.value / predicted : 0.0;
  return std::abs(s.value - predicted);
}

}  // namespace

bool Report::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

std::string Report::text() const {
  std::ostringstream out;
  for (const auto& c : checks) {
    out << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.criterion
        << " | measured " << io::format_double(c.measured) << ", tolerance "
        << io::format_double(c.tolerance) << ", instances " << c.instances;
    if (!c.detail.empty()) out << " | " << c.detail;
    out << '\n';
  }
  out << (passed() ? "ALL PASS" : "FAILURES PRESENT") << '\n';
  return out.str();
}

MlpInstance random_instance(std::uint64_t seed, nn::Activation activation) {
  auto rng = make_rng(seed, Stream::verify, 0);
  const std::size_t d = pick(rng, 2, 5);
  const std::size_t c = pick(rng, 2, 4);
  const std::size_t h = pick(rng, 1, 8);
  const std::size_t n = pick(rng, 1, 8);
  nn::MlpArchitecture arch({d, h, c}, activation);
  auto params = nn::init_params(arch, derive_seed(seed, Stream::verify, 1));
  std::normal_distribution<double> unit(0.0, 1.0);
  for (auto& v : params.values) v += 0.3 * unit(rng);
  std::vector<Sample> batch(n);
  std::uniform_int_distribution<int> label(0, static_cast<int>(c) - 1);
  for (auto& s : batch) {
    s.x.resize(d);
    for (auto& v : s.x) v = unit(rng);
    s.y = label(rng);
  }
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::vector<double> pi(c);
  double total = 0.0;
  for (auto& p : pi) total += (p = u(rng));
  for (auto& p : pi) p /= total;
  const double tau = std::uniform_real_distribution<double>(0.0, 1.5)(rng);
  return MlpInstance{std::move(arch), std::move(params), std::move(batch),
                     nn::ClassPriors(std::move(pi)), tau};
}

Check gradient_check(const Options& options) {
  constexpr double kStep = 1e-5;
  Check check{"gradient",
              "max_i |analytic_i - central_i| / max(||central||_inf, 1e-12) below tolerance",
              0.0, 1e-4, options.gradient_instances, false, {}};
  const auto grad = gradient_or_default(options);
  std::size_t worst = 0;
  for (std::size_t i = 0; i < options.gradient_instances; ++i) {
    const auto act = i % 2 == 0 ? nn::Activation::tanh : nn::Activation::relu;
    const auto inst = random_instance(derive_seed(options.seed, Stream::verify, 100 + i), act);
    const auto analytic = grad(inst.arch, inst.params, inst.batch, inst.priors, inst.tau).grad;
    const auto numeric =
        nn::finite_diff_grad(inst.arch, inst.params, inst.batch, inst.priors, inst.tau, kStep);
    double scale = 1e-12;
    for (double v : numeric.values) scale = std::max(scale, std::abs(v));
    double err = analytic.values.size() == numeric.values.size()
                     ? 0.0
                     : std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; std::isfinite(err) && j < numeric.values.size(); ++j) {
      err = std::max(err, std::abs(analytic.values[j] - numeric.values[j]) / scale);
    }
    if (!(err <= check.measured)) {
      check.measured = err;
      worst = i;
    }
  }
  check.passed = check.measured < check.tolerance;
  check.detail = "step 1e-5, worst instance " + std::to_string(worst);
  return check;
}

Check sharpness_ratio_check(const Options& options) {
  constexpr double kRho = 1e-4;
  Check check{"sharpness-first-order",
              "max |S / (rho ||g||) - 1| at rho = 1e-4 below tolerance (smooth tanh networks)",
              0.0, 0.01, options.sharpness_instances, false, {}};
  const auto grad = gradient_or_default(options);
  for (std::size_t i = 0; i < options.sharpness_instances; ++i) {
    const auto inst =
        random_instance(derive_seed(options.seed, Stream::verify, 1000 + i), nn::Activation::tanh);
    double ratio = 0.0;
    first_order_gap(inst, grad, kRho, &ratio);
    const double dev = std::isfinite(ratio) ? std::abs(ratio - 1.0)
                                            : std::numeric_limits<double>::infinity();
    check.measured = std::max(check.measured, dev);
  }
  check.passed = check.measured <= check.tolerance;
  return check;
}

Check sharpness_convergence_check(const Options& options) {
  Check check{"sharpness-convergence",
              "min over instances of gap(rho=1e-3) / gap(rho=1e-4) at or above tolerance", 0.0,
              5.0, options.sharpness_instances, false, {}};
  const auto grad = gradient_or_default(options);
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < options.sharpness_instances; ++i) {
    const auto inst =
        random_instance(derive_seed(options.seed, Stream::verify, 1000 + i), nn::Activation::tanh);
    const double coarse = first_order_gap(inst, grad, 1e-3, nullptr);
    const double fine = first_order_gap(inst, grad, 1e-4, nullptr);
    const double shrink =
        fine > 0.0 ? coarse / fine : (coarse > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    worst = std::min(worst, shrink);
  }
  check.measured = worst;
  check.passed = worst >= check.tolerance;
  return check;
}

Check simplex_check(const Options& options) {
  Check check{"simplex", "max |sum(w) - 1| plus negative mass over emitted weights below tolerance",
              0.0, 1e-12, options.simplex_instances, false, {}};
  auto rng = make_rng(options.seed, Stream::verify, 2);
  const double qs[] = {0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0};
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto violation = [](const fed::AggregationWeights& w) {
    double sum = 0.0;
    double negative = 0.0;
    for (double v : w.w) {
      if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
      sum += v;
      negative += std::max(0.0, -v);
    }
    return std::abs(sum - 1.0) + negative;
  };
  for (std::size_t i = 0; i < options.simplex_instances; ++i) {
    const std::size_t k = pick(rng, 1, 20);
    const double scale = std::pow(10.0, 6.0 * u(rng) - 3.0);
    std::vector<double> s(k);
    std::vector<std::size_t> sizes(k);
    for (std::size_t j = 0; j < k; ++j) {
      s[j] = scale * u(rng);
      sizes[j] = pick(rng, 1, 500);
    }
    const double q = qs[i % std::size(qs)];
    const auto raw = fed::sharpness_weights(s, q);
    const auto prev = fed::sharpness_weights(std::vector<double>(k, 1.0), 1.0);
    const auto smoothed = fed::smooth_weights(raw, prev, u(rng), 2);
    for (const auto& w : {raw, fed::loss_weights(s, q), fed::fedavg_weights(sizes), smoothed}) {
      check.measured = std::max(check.measured, violation(w));
    }
  }
  check.passed = check.measured <= check.tolerance;
  return check;
}

Check minimax_check(const Options& options) {
  Check check{"minimax-equivalence",
              "client- and attribute-level minimax agree (values, argmin column, mu relation) "
              "on a 0.01 simplex grid; measured = max value gap",
              0.0, 1e-2, options.minimax_instances, false, {}};
  auto rng = make_rng(options.seed, Stream::verify, 3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t failures = 0;
  for (std::size_t i = 0; i < options.minimax_instances; ++i) {
    const std::size_t k = pick(rng, 2, 4);
    const std::size_t m = pick(rng, 1, 5);
    std::vector<int> attributes(k);
    for (auto& a : attributes) a = static_cast<int>(pick(rng, 0, 1));
    attributes[0] = 0;
    attributes[1] = 1;
    std::shuffle(attributes.begin(), attributes.end(), rng);
    std::vector<std::vector<double>> rows(2, std::vector<double>(m));
    for (auto& row : rows) {
      for (auto& v : row) v = u(rng);
    }
    fed::RiskTable table(k);
    for (std::size_t j = 0; j < k; ++j) table[j] = rows[attributes[j]];
    const auto report = fed::verify_minimax_equivalence(table, attributes, 0.01);
    check.measured =
        std::max(check.measured, std::abs(report.client_value - report.attribute_value));
    if (!report.passed()) ++failures;
  }
  check.passed = failures == 0 && check.measured <= check.tolerance;
  check.detail = std::to_string(failures) + " instance(s) with a failed sub-check";
  return check;
}

Report run_all(const Options& options) {
  Report report;
  report.checks.push_back(gradient_check(options));
  report.checks.push_back(sharpness_ratio_check(options));
  report.checks.push_back(sharpness_convergence_check(options));
  report.checks.push_back(simplex_check(options));
  report.checks.push_back(minimax_check(options));
  return report;
}

}  // namespace fedism::verify
