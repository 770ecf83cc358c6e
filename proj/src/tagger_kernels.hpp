#pragma once

#include <cmath>
#include <vector>

#include "xnf/tagger.hpp"

namespace xnf::detail {

struct Workspace {
  std::vector<double> x;      // window input
  std::vector<double> h;      // hidden activations
  std::vector<double> probs;  // logits, then softmax in place
  std::vector<double> grad_z;
  std::vector<double> grad_a;
  std::vector<double> grad_x;

  explicit Workspace(const TaggerConfig& c)
      : x(c.input_dim()),
        h(c.hidden_dim),
        probs(c.labels.size()),
        grad_z(c.labels.size()),
        grad_a(c.hidden_dim),
        grad_x(c.input_dim()) {}
};

// Fills ws.x, ws.h and ws.probs for token i.
inline void token_forward(const TaggerModel& m, const std::vector<std::size_t>& ids, std::size_t i,
                          Workspace& ws) {
  const auto& c = m.config;
  const std::size_t E = c.embed_dim;
  const std::size_t H = c.hidden_dim;
  const std::size_t L = c.labels.size();
  const std::size_t D = c.input_dim();
  const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(c.window);

  for (std::ptrdiff_t k = -w; k <= w; ++k) {
    const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(i) + k;
    const std::size_t id = (pos < 0 || pos >= static_cast<std::ptrdiff_t>(ids.size()))
                               ? Vocab::kPad
                               : ids[static_cast<std::size_t>(pos)];
    const double* row = &m.embeddings[id * E];
    double* dst = &ws.x[static_cast<std::size_t>(k + w) * E];
    for (std::size_t e = 0; e < E; ++e) dst[e] = row[e];
  }

  for (std::size_t j = 0; j < H; ++j) ws.h[j] = m.hidden_b[j];
  for (std::size_t d = 0; d < D; ++d) {
    const double xd = ws.x[d];
    if (xd == 0.0) continue;
    const double* wrow = &m.hidden_w[d * H];
    for (std::size_t j = 0; j < H; ++j) ws.h[j] += xd * wrow[j];
  }
  for (std::size_t j = 0; j < H; ++j) ws.h[j] = std::tanh(ws.h[j]);

  for (std::size_t l = 0; l < L; ++l) ws.probs[l] = m.output_b[l];
  for (std::size_t j = 0; j < H; ++j) {
    const double hj = ws.h[j];
    const double* wrow = &m.output_w[j * L];
    for (std::size_t l = 0; l < L; ++l) ws.probs[l] += hj * wrow[l];
  }
  softmax_inplace(ws.probs);
}

inline std::size_t argmax_label(const std::vector<double>& probs) {
  std::size_t best = 0;
  for (std::size_t l = 1; l < probs.size(); ++l) {
    if (probs[l] > probs[best]) best = l;
  }
  return best;
}

LabeledSentence predict_with(const TaggerModel& m, const std::vector<std::string>& tokens, Workspace& ws);

}  // namespace xnf::detail
