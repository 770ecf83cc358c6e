#include "xnf/losses.hpp"

#include <algorithm>
#include <cmath>

#include "xnf/error.hpp"

namespace xnf {

void LossKind::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw Error(ErrorKind::InvalidSpec, "loss gamma must be a finite non-negative number");
  }
}

std::string LossKind::name() const {
  switch (variant) {
    case Variant::CrossEntropy: return "ce";
    case Variant::Focal: return "focal";
    case Variant::Reweighted: return "rw";
  }
  return "ce";
}

LossKind LossKind::parse(const std::string& name, double gamma) {
  LossKind k;
  if (name == "ce") {
    k = cross_entropy();
    k.gamma = gamma;
  } else if (name == "focal") {
    k = focal(gamma);
  } else if (name == "rw") {
    k = reweighted(gamma);
  } else {
    throw Error(ErrorKind::Config, "unknown loss kind '" + name + "' (expected ce, focal or rw)");
  }
  k.validate();
  return k;
}

namespace {

double clamp_prob(double p) { return std::clamp(p, kProbFloor, 1.0); }

// d weight / d p_t
double weight_derivative(double p, const LossKind& kind) {
  if (kind.gamma == 0.0) return 0.0;
  switch (kind.variant) {
    case LossKind::Variant::CrossEntropy: return 0.0;
    case LossKind::Variant::Focal: return -kind.gamma * std::pow(1.0 - p, kind.gamma - 1.0);
    case LossKind::Variant::Reweighted: return kind.gamma * std::pow(1.0 + p, kind.gamma - 1.0);
  }
  return 0.0;
}

}  // namespace

double loss_weight(double p, const LossKind& kind) {
  switch (kind.variant) {
    case LossKind::Variant::CrossEntropy: return 1.0;
    case LossKind::Variant::Focal: return std::pow(1.0 - p, kind.gamma);
    case LossKind::Variant::Reweighted: return std::pow(1.0 + p, kind.gamma);
  }
  return 1.0;
}

double token_loss(std::span<const double> probs, std::size_t true_label, const LossKind& kind) {
  if (true_label >= probs.size()) {
    throw Error(ErrorKind::IndexOutOfRange,
                "label " + std::to_string(true_label) + " with " + std::to_string(probs.size()) + " classes");
  }
  const double p = clamp_prob(probs[true_label]);
  // -0.0 at p == 1 would still compare equal to 0; normalise anyway.
  const double loss = -loss_weight(p, kind) * std::log(p);
  return loss == 0.0 ? 0.0 : loss;
}

double batch_loss(const std::vector<std::vector<double>>& dists, const std::vector<std::size_t>& labels,
                  const std::vector<bool>& mask, const LossKind& kind) {
  if (dists.size() != labels.size() || dists.size() != mask.size()) {
    throw Error(ErrorKind::ShapeMismatch, "dists, labels and mask differ in length");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < dists.size(); ++i) {
    if (!mask[i]) continue;
    sum += token_loss(dists[i], labels[i], kind);
    ++count;
  }
  if (count == 0) throw Error(ErrorKind::AllMasked, "every token is masked");
  return sum / static_cast<double>(count);
}

void softmax_inplace(std::span<double> v) {
  if (v.empty()) return;
  const double mx = *std::max_element(v.begin(), v.end());
  double z = 0.0;
  for (auto& x : v) {
    x = std::exp(x - mx);
    z += x;
  }
  for (auto& x : v) x /= z;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.begin(), logits.end());
  softmax_inplace(out);
  return out;
}

double loss_and_gradient(std::span<const double> probs, std::size_t true_label, const LossKind& kind,
                         double scale, std::span<double> grad) {
  if (true_label >= probs.size()) {
    throw Error(ErrorKind::IndexOutOfRange,
                "label " + std::to_string(true_label) + " with " + std::to_string(probs.size()) + " classes");
  }
  const double raw = probs[true_label];
  const double p = clamp_prob(raw);
  const double logp = std::log(p);
  const double w = loss_weight(p, kind);
  // L = -w(p) log p. dL/dp = -w'(p) log p - w / p, and dp/dz_j = p (delta_j - q_j),
  // so dL/dz_j = (-w'(p) p log p - w) (delta_j - q_j). Below the clamp the
  // loss is constant.
  double coeff = 0.0;
  if (raw >= kProbFloor) {
    const double wd_term = logp == 0.0 ? 0.0 : -weight_derivative(p, kind) * p * logp;
    coeff = wd_term - w;
  }
  coeff *= scale;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    const double delta = j == true_label ? 1.0 : 0.0;
    grad[j] = coeff * (delta - probs[j]);
  }
  const double loss = -w * logp;
  return loss == 0.0 ? 0.0 : loss;
}

std::vector<double> loss_gradient(std::span<const double> logits, std::size_t true_label, const LossKind& kind) {
  auto probs = softmax(logits);
  std::vector<double> grad(logits.size());
  loss_and_gradient(probs, true_label, kind, 1.0, grad);
  return grad;
}

}  // namespace xnf
