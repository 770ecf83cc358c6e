#include <cmath>

#include "xnf/error.hpp"
#include "xnf/evalkit.hpp"
#include "xnf/rng.hpp"
#include "xnf/spans.hpp"

namespace xnf {

void Metrics::finalize() {
  precision = predicted > 0 ? static_cast<double>(true_positives) / static_cast<double>(predicted) : 0.0;
  recall = gold > 0 ? static_cast<double>(true_positives) / static_cast<double>(gold) : 0.0;
  f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

EvalReport evaluate(const std::vector<LabeledSentence>& pred, const std::vector<LabeledSentence>& gold) {
  if (pred.size() != gold.size()) {
    throw Error(ErrorKind::ShapeMismatch, std::to_string(pred.size()) + " predicted sentences vs " +
                                              std::to_string(gold.size()) + " gold");
  }
  EvalReport report;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].tags.size() != gold[i].tags.size()) {
      throw Error(ErrorKind::ShapeMismatch, "sentence " + std::to_string(i) + ": " +
                                                std::to_string(pred[i].tags.size()) + " predicted tags vs " +
                                                std::to_string(gold[i].tags.size()) + " gold");
    }
    const auto p = decode_spans(pred[i].tags);
    const auto g = decode_spans(gold[i].tags);
    for (const auto& s : p) ++report.per_type[s.type].predicted;
    for (const auto& s : g) ++report.per_type[s.type].gold;
    // Both lists are sorted by start and non-overlapping: merge.
    std::size_t a = 0;
    std::size_t b = 0;
    while (a < p.size() && b < g.size()) {
      if (p[a].start < g[b].start) {
        ++a;
      } else if (g[b].start < p[a].start) {
        ++b;
      } else {
        if (p[a].end == g[b].end && p[a].type == g[b].type) ++report.per_type[p[a].type].true_positives;
        ++a;
        ++b;
      }
    }
  }
  for (auto& [type, m] : report.per_type) {
    m.finalize();
    report.micro.true_positives += m.true_positives;
    report.micro.predicted += m.predicted;
    report.micro.gold += m.gold;
  }
  report.micro.finalize();
  return report;
}

TaggerModel finetune_student(const TaggerModel& teacher, const std::vector<LabeledSentence>& data,
                             const TrainConfig& cfg) {
  TaggerModel student = remap_vocab(teacher, build_vocab(data, 1), cfg.seed);
  return train(std::move(student), data, cfg).model;
}

TaggerModel train_from_scratch(const TaggerConfig& arch, const std::vector<LabeledSentence>& data,
                               const TrainConfig& cfg) {
  TaggerConfig c = arch;
  c.seed = cfg.seed;
  return train(TaggerModel::initialized(std::move(c), build_vocab(data, 1)), data, cfg).model;
}

EvalReport evaluate_model(const TaggerModel& model, const std::vector<LabeledSentence>& gold) {
  std::vector<std::vector<std::string>> tokens;
  tokens.reserve(gold.size());
  for (const auto& s : gold) tokens.push_back(s.tokens);
  return evaluate(predict_batch(model, tokens), gold);
}

std::vector<LabeledSentence> inject_label_noise(const std::vector<LabeledSentence>& data,
                                                const std::vector<std::string>& labels, double rate,
                                                std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw Error(ErrorKind::InvalidSpec, "noise rate must be in [0,1]");
  if (labels.size() < 2) throw Error(ErrorKind::InvalidSpec, "noise needs at least two labels");
  Rng rng(seed);
  auto out = data;
  for (auto& s : out) {
    for (auto& tag : s.tags) {
      if (!rng.bernoulli(rate)) continue;
      std::size_t current = labels.size();
      for (std::size_t l = 0; l < labels.size(); ++l) {
        if (labels[l] == tag) current = l;
      }
      std::size_t pick = rng.below(labels.size() - 1);
      if (current < labels.size() && pick >= current) ++pick;
      tag = labels[pick];
    }
  }
  return out;
}

}  // namespace xnf
