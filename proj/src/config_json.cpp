#include "xnf/config_json.hpp"

#include "xnf/error.hpp"

namespace xnf {

using nlohmann::json;

namespace {

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace

void to_json(json& j, const LossKind& k) { j = json{{"kind", k.name()}, {"gamma", k.gamma}}; }

void from_json(const json& j, LossKind& k) {
  std::string kind = k.name();
  double gamma = k.gamma;
  read(j, "kind", kind);
  read(j, "gamma", gamma);
  k = LossKind::parse(kind, gamma);
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"learning_rate", c.learning_rate}, {"epochs", c.epochs},
           {"batch_size", c.batch_size},       {"loss", c.loss},
           {"freeze_embeddings", c.freeze_embeddings}, {"seed", c.seed}};
}

void from_json(const json& j, TrainConfig& c) {
  read(j, "learning_rate", c.learning_rate);
  read(j, "epochs", c.epochs);
  read(j, "batch_size", c.batch_size);
  read(j, "freeze_embeddings", c.freeze_embeddings);
  read(j, "seed", c.seed);
  if (j.contains("loss")) c.loss = j.at("loss").get<LossKind>();
}

void to_json(json& j, const TaggerConfig& c) {
  j = json{{"embed_dim", c.embed_dim}, {"window", c.window}, {"hidden_dim", c.hidden_dim},
           {"labels", c.labels},       {"seed", c.seed}};
}

void from_json(const json& j, TaggerConfig& c) {
  read(j, "embed_dim", c.embed_dim);
  read(j, "window", c.window);
  read(j, "hidden_dim", c.hidden_dim);
  read(j, "labels", c.labels);
  read(j, "seed", c.seed);
}

void to_json(json& j, const AlignerConfig& c) {
  j = json{{"threshold", c.threshold}, {"max_span_len", c.max_span_len}, {"tie_epsilon", c.tie_epsilon}};
}

void from_json(const json& j, AlignerConfig& c) {
  read(j, "threshold", c.threshold);
  read(j, "max_span_len", c.max_span_len);
  read(j, "tie_epsilon", c.tie_epsilon);
}

void to_json(json& j, const SynthSpec& s) {
  json weights = json::array();
  for (const auto& [name, w] : s.type_weights) weights.push_back({name, w});
  j = json{{"vocab_size", s.vocab_size},     {"lexicon_seed", s.lexicon_seed}, {"entity_rate", s.entity_rate},
           {"reorder_prob", s.reorder_prob}, {"type_weights", weights},        {"domain", s.domain},
           {"name_copy_rate", s.name_copy_rate}, {"repeat_rate", s.repeat_rate}};
}

void from_json(const json& j, SynthSpec& s) {
  read(j, "vocab_size", s.vocab_size);
  read(j, "lexicon_seed", s.lexicon_seed);
  read(j, "entity_rate", s.entity_rate);
  read(j, "reorder_prob", s.reorder_prob);
  read(j, "domain", s.domain);
  read(j, "name_copy_rate", s.name_copy_rate);
  read(j, "repeat_rate", s.repeat_rate);
  if (j.contains("type_weights")) {
    s.type_weights.clear();
    const auto& tw = j.at("type_weights");
    // Either [["PER", 1.0], ...] (ordered) or {"PER": 1.0, ...}.
    if (tw.is_array()) {
      for (const auto& e : tw) s.type_weights.emplace_back(e.at(0).get<std::string>(), e.at(1).get<double>());
    } else if (tw.is_object()) {
      for (const auto& [k, v] : tw.items()) s.type_weights.emplace_back(k, v.get<double>());
    } else {
      throw Error(ErrorKind::Config, "type_weights must be an array or object");
    }
  }
}

}  // namespace xnf
