#include "fedism/nn.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "fedism/rng.hpp"

namespace fedism::nn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;

void check_params(const MlpArchitecture& arch, std::span<const double> params) {
  if (params.size() != arch.num_params()) {
    throw std::invalid_argument("parameter vector has length " + std::to_string(params.size()) +
                                ", architecture expects " + std::to_string(arch.num_params()));
  }
}

void check_input(const MlpArchitecture& arch, std::span<const double> x) {
  if (x.size() != arch.input_width()) {
    throw std::invalid_argument("feature vector has length " + std::to_string(x.size()) +
                                ", architecture expects " + std::to_string(arch.input_width()));
  }
}

void check_label(const MlpArchitecture& arch, int y) {
  if (y < 0 || static_cast<std::size_t>(y) >= arch.num_classes()) {
    throw std::invalid_argument("label " + std::to_string(y) + " out of range");
  }
}

double activate(Activation a, double z) {
  return a == Activation::relu ? std::max(z, 0.0) : std::tanh(z);
}

// Derivative expressed through the activation output (valid for both relu and tanh).
double activate_grad_from_output(Activation a, double out) {
  return a == Activation::relu ? (out > 0.0 ? 1.0 : 0.0) : 1.0 - out * out;
}

// Forward pass keeping every layer's post-activation output; the last entry
// holds the raw logits.
std::vector<Eigen::VectorXd> forward_trace(const MlpArchitecture& arch,
                                           std::span<const double> params,
                                           std::span<const double> x) {
  std::vector<Eigen::VectorXd> acts;
  acts.reserve(arch.num_layers() + 1);
  acts.emplace_back(ConstVectorMap(x.data(), static_cast<Eigen::Index>(x.size())));
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    const auto in = static_cast<Eigen::Index>(arch.layer_widths[l]);
    const auto out = static_cast<Eigen::Index>(arch.layer_widths[l + 1]);
    ConstMatrixMap w(params.data() + arch.weight_offset(l), out, in);
    ConstVectorMap b(params.data() + arch.bias_offset(l), out);
    Eigen::VectorXd z = w * acts.back() + b;
    if (l + 1 < arch.num_layers()) {
      z = z.unaryExpr([&](double v) { return activate(arch.activation, v); });
    }
    acts.push_back(std::move(z));
  }
  return acts;
}

// Softmax of the adjusted logits; returns the loss for label y.
double softmax_ce(const Eigen::VectorXd& logits, const ClassPriors& priors, double tau, int y,
                  Eigen::VectorXd& probs) {
  probs = logits;
  if (tau != 0.0) {
    for (Eigen::Index c = 0; c < probs.size(); ++c) {
      probs[c] += tau * std::log(priors.pi[static_cast<std::size_t>(c)]);
    }
  }
  const double m = probs.maxCoeff();
  probs = (probs.array() - m).exp();
  const double denom = probs.sum();
  const double loss = std::log(denom) - std::log(probs[y]);
  probs /= denom;
  return loss;
}

void check_priors(const MlpArchitecture& arch, const ClassPriors& priors) {
  if (priors.pi.size() != arch.num_classes()) {
    throw std::invalid_argument("class priors have " + std::to_string(priors.pi.size()) +
                                " entries, architecture has " +
                                std::to_string(arch.num_classes()) + " classes");
  }
}

double mean_loss(const MlpArchitecture& arch, std::span<const double> params,
                 std::span<const Sample> batch, const ClassPriors& priors, double tau) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  check_params(arch, params);
  check_priors(arch, priors);
  double total = 0.0;
  Eigen::VectorXd probs;
  for (const auto& s : batch) {
    check_input(arch, s.x);
    check_label(arch, s.y);
    auto acts = forward_trace(arch, params, s.x);
    total += softmax_ce(acts.back(), priors, tau, s.y, probs);
  }
  return total / static_cast<double>(batch.size());
}

LossAndGrad mean_loss_and_grad(const MlpArchitecture& arch, std::span<const double> params,
                               std::span<const Sample> batch, const ClassPriors& priors,
                               double tau) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  check_params(arch, params);
  check_priors(arch, priors);
  LossAndGrad out{0.0, GradientVector(arch.num_params())};
  auto& grad = out.grad.values;
  Eigen::VectorXd probs;
  for (const auto& s : batch) {
    check_input(arch, s.x);
    check_label(arch, s.y);
    auto acts = forward_trace(arch, params, s.x);
    out.loss += softmax_ce(acts.back(), priors, tau, s.y, probs);
    // dL/dlogits; the additive prior shift does not change it.
    Eigen::VectorXd delta = probs;
    delta[s.y] -= 1.0;
    for (std::size_t l = arch.num_layers(); l-- > 0;) {
      const auto in = static_cast<Eigen::Index>(arch.layer_widths[l]);
      const auto outw = static_cast<Eigen::Index>(arch.layer_widths[l + 1]);
      MatrixMap gw(grad.data() + arch.weight_offset(l), outw, in);
      VectorMap gb(grad.data() + arch.bias_offset(l), outw);
      gw.noalias() += delta * acts[l].transpose();
      gb += delta;
      if (l == 0) break;
      ConstMatrixMap w(params.data() + arch.weight_offset(l), outw, in);
      Eigen::VectorXd back = w.transpose() * delta;
      for (Eigen::Index i = 0; i < in; ++i) {
        back[i] *= activate_grad_from_output(arch.activation, acts[l][i]);
      }
      delta = std::move(back);
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv;
  for (auto& g : grad) g *= inv;
  return out;
}

}  // namespace

MlpArchitecture::MlpArchitecture(std::vector<std::size_t> widths, Activation act)
    : layer_widths(std::move(widths)), activation(act) {
  if (layer_widths.size() < 2) {
    throw std::invalid_argument("architecture needs at least an input and an output width");
  }
  if (std::any_of(layer_widths.begin(), layer_widths.end(), [](auto w) { return w == 0; })) {
    throw std::invalid_argument("layer widths must be positive");
  }
}

std::size_t MlpArchitecture::num_params() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    n += layer_widths[l + 1] * (layer_widths[l] + 1);
  }
  return n;
}

std::size_t MlpArchitecture::weight_offset(std::size_t l) const {
  std::size_t off = 0;
  for (std::size_t i = 0; i < l; ++i) off += layer_widths[i + 1] * (layer_widths[i] + 1);
  return off;
}

std::size_t MlpArchitecture::bias_offset(std::size_t l) const {
  return weight_offset(l) + layer_widths[l + 1] * layer_widths[l];
}

bool ParameterVector::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

double GradientVector::norm() const {
  return ConstVectorMap(values.data(), static_cast<Eigen::Index>(values.size())).norm();
}

bool GradientVector::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

ClassPriors::ClassPriors(std::vector<double> p) : pi(std::move(p)) {
  if (pi.empty()) throw std::invalid_argument("class priors must be nonempty");
  double sum = 0.0;
  for (double v : pi) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("class priors must be strictly positive and finite");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("class priors must sum to 1");
}

ClassPriors ClassPriors::uniform(std::size_t classes) {
  return ClassPriors(std::vector<double>(classes, 1.0 / static_cast<double>(classes)));
}

ClassPriors ClassPriors::from_labels(std::span<const Sample> samples, std::size_t classes) {
  std::vector<double> counts(classes, 1.0);
  for (const auto& s : samples) {
    if (s.y < 0 || static_cast<std::size_t>(s.y) >= classes) {
      throw std::invalid_argument("label " + std::to_string(s.y) + " out of range");
    }
    counts[static_cast<std::size_t>(s.y)] += 1.0;
  }
  const double total = static_cast<double>(samples.size() + classes);
  for (auto& c : counts) c /= total;
  return ClassPriors(std::move(counts));
}

ParameterVector init_params(const MlpArchitecture& arch, std::uint64_t seed) {
  ParameterVector params(arch.num_params());
  Rng rng = make_rng(seed, Stream::init);
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    const double fan_in = static_cast<double>(arch.layer_widths[l]);
    const bool hidden = l + 1 < arch.num_layers();
    const double gain = hidden && arch.activation == Activation::relu ? 2.0 : 1.0;
    std::normal_distribution<double> dist(0.0, std::sqrt(gain / fan_in));
    const std::size_t begin = arch.weight_offset(l);
    const std::size_t end = arch.bias_offset(l);
    for (std::size_t i = begin; i < end; ++i) params.values[i] = dist(rng);
  }
  return params;
}

std::vector<double> forward(const MlpArchitecture& arch, const ParameterVector& params,
                            std::span<const double> x) {
  check_params(arch, params.values);
  check_input(arch, x);
  auto acts = forward_trace(arch, params.values, x);
  const auto& z = acts.back();
  return {z.data(), z.data() + z.size()};
}

std::vector<double> adjust_logits(std::span<const double> logits, const ClassPriors& priors,
                                  double tau) {
  if (tau < 0.0) throw std::invalid_argument("tau must be nonnegative");
  if (logits.size() != priors.pi.size()) {
    throw std::invalid_argument("logits and priors differ in length");
  }
  std::vector<double> out(logits.begin(), logits.end());
  if (tau == 0.0) return out;
  for (std::size_t c = 0; c < out.size(); ++c) out[c] += tau * std::log(priors.pi[c]);
  return out;
}

double ce_loss(std::span<const double> logits, int y) {
  if (y < 0 || static_cast<std::size_t>(y) >= logits.size()) {
    throw std::invalid_argument("label " + std::to_string(y) + " out of range");
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (double z : logits) denom += std::exp(z - m);
  return std::log(denom) - (logits[static_cast<std::size_t>(y)] - m);
}

double batch_loss(const MlpArchitecture& arch, const ParameterVector& params,
                  std::span<const Sample> batch, const ClassPriors& priors, double tau) {
  return mean_loss(arch, params.values, batch, priors, tau);
}

LossAndGrad batch_loss_and_grad(const MlpArchitecture& arch, const ParameterVector& params,
                                std::span<const Sample> batch, const ClassPriors& priors,
                                double tau) {
  return mean_loss_and_grad(arch, params.values, batch, priors, tau);
}

MlpObjective::MlpObjective(const MlpArchitecture& arch, std::span<const Sample> batch,
                           const ClassPriors& priors, double tau)
    : arch_(arch), batch_(batch), priors_(priors), tau_(tau) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
}

double MlpObjective::loss(std::span<const double> params) const {
  return mean_loss(arch_, params, batch_, priors_, tau_);
}

LossAndGrad MlpObjective::loss_and_grad(std::span<const double> params) const {
  return mean_loss_and_grad(arch_, params, batch_, priors_, tau_);
}

GradientVector finite_diff_grad(const Objective& objective, std::span<const double> params,
                                double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  std::vector<double> probe(params.begin(), params.end());
  GradientVector g(params.size());
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = objective.loss(probe);
    probe[i] = orig - h;
    const double down = objective.loss(probe);
    probe[i] = orig;
    g.values[i] = (up - down) / (2.0 * h);
  }
  return g;
}

GradientVector finite_diff_grad(const MlpArchitecture& arch, const ParameterVector& params,
                                std::span<const Sample> batch, const ClassPriors& priors,
                                double tau, double h) {
  MlpObjective objective(arch, batch, priors, tau);
  return finite_diff_grad(objective, params.values, h);
}

}  // namespace fedism::nn
