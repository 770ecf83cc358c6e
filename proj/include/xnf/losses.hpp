#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace xnf {

// Per-token loss family. Focal scales cross-entropy by (1 - p_t)^gamma,
// which favours hard tokens; Reweighted scales it by (1 + p_t)^gamma, which
// favours confident tokens and so discounts likely-noisy labels.
struct LossKind {
  enum class Variant { CrossEntropy, Focal, Reweighted };

  Variant variant = Variant::CrossEntropy;
  double gamma = 0.0;

  static LossKind cross_entropy() { return {Variant::CrossEntropy, 0.0}; }
  static LossKind focal(double gamma) { return {Variant::Focal, gamma}; }
  static LossKind reweighted(double gamma) { return {Variant::Reweighted, gamma}; }

  void validate() const;

  // "ce" | "focal" | "rw"
  std::string name() const;
  static LossKind parse(const std::string& name, double gamma);

  bool operator==(const LossKind&) const = default;
};

inline constexpr double kProbFloor = 1e-12;

// Weight multiplying -log p_t.
double loss_weight(double p_true, const LossKind& kind);

// probs must be a distribution (each in [0,1], sum within 1e-6 of 1).
double token_loss(std::span<const double> probs, std::size_t true_label, const LossKind& kind);

// Mean token loss over unmasked entries. Throws AllMasked if none remain.
double batch_loss(const std::vector<std::vector<double>>& dists, const std::vector<std::size_t>& labels,
                  const std::vector<bool>& mask, const LossKind& kind);

std::vector<double> softmax(std::span<const double> logits);
void softmax_inplace(std::span<double> values);

// Gradient of token_loss(softmax(logits)) with respect to the logits. The
// (1 -/+ p_t)^gamma factor is differentiated, not treated as a constant.
std::vector<double> loss_gradient(std::span<const double> logits, std::size_t true_label, const LossKind& kind);

// In-place variant used by the tagger: takes the softmax output, writes the
// logit gradient scaled by `scale` into grad, returns the loss.
double loss_and_gradient(std::span<const double> probs, std::size_t true_label, const LossKind& kind,
                         double scale, std::span<double> grad);

}  // namespace xnf
