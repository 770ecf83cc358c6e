#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xnf/losses.hpp"
#include "xnf/types.hpp"

namespace xnf {

class Vocab {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::string_view kPadWord = "<pad>";
  static constexpr std::string_view kUnkWord = "<unk>";

  Vocab();

  // Words are ordered by (count desc, word asc); words seen fewer than
  // min_count times are left out and map to UNK.
  static Vocab build(const std::vector<std::vector<std::string>>& sentences, std::size_t min_count);

  std::size_t id(std::string_view word) const;
  bool contains(std::string_view word) const { return index_.count(std::string(word)) > 0; }
  const std::string& word(std::size_t id) const { return words_.at(id); }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

  std::vector<std::size_t> encode(const std::vector<std::string>& tokens) const;

  // "word<TAB>id" per line.
  std::string to_tsv() const;
  static Vocab from_tsv(std::string_view text);

  bool operator==(const Vocab& o) const { return words_ == o.words_; }

 private:
  void push(std::string word);

  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
};

Vocab build_vocab(const std::vector<LabeledSentence>& corpus, std::size_t min_count);

struct TaggerConfig {
  std::size_t embed_dim = 32;
  std::size_t window = 2;
  std::size_t hidden_dim = 64;
  std::vector<std::string> labels = labels_for(TypeSet::conll());
  std::uint64_t seed = 1;

  // "O" followed by B-T, I-T for each type in registry order.
  static std::vector<std::string> labels_for(const TypeSet& types);

  std::size_t input_dim() const { return (2 * window + 1) * embed_dim; }
  void validate() const;
  bool operator==(const TaggerConfig&) const = default;
};

struct TrainConfig {
  double learning_rate = 0.1;
  std::size_t epochs = 5;
  std::size_t batch_size = 8;
  LossKind loss = LossKind::cross_entropy();
  bool freeze_embeddings = false;
  std::uint64_t seed = 1;

  void validate() const;
};

// Window tagger: each token is represented by the concatenated embeddings of
// its (2w+1)-token window (PAD past the sentence edges), passed through one
// tanh hidden layer and a softmax output layer.
struct TaggerModel {
  TaggerConfig config;
  Vocab vocab;
  std::vector<double> embeddings;  // |V| x E
  std::vector<double> hidden_w;    // (2w+1)E x H
  std::vector<double> hidden_b;    // H
  std::vector<double> output_w;    // H x L
  std::vector<double> output_b;    // L

  // All parameters zero.
  TaggerModel(TaggerConfig config, Vocab vocab);

  // Seeded uniform initialisation (embeddings in [-0.1, 0.1], Glorot for the
  // dense layers, zero biases).
  static TaggerModel initialized(TaggerConfig config, Vocab vocab);

  std::size_t num_labels() const { return config.labels.size(); }
  std::size_t label_id(std::string_view tag) const;
  std::size_t parameter_count() const;

  // Blocks in declaration order: embeddings, hidden_w, hidden_b, output_w, output_b.
  std::vector<std::span<double>> parameter_blocks();
  std::vector<std::span<const double>> parameter_blocks() const;

  bool operator==(const TaggerModel&) const = default;
};

// Per-token label distributions.
std::vector<std::vector<double>> forward(const TaggerModel& model, const std::vector<std::string>& tokens);

// Argmax (lowest label id wins ties) followed by IOB2 repair.
LabeledSentence predict(const TaggerModel& model, const std::vector<std::string>& tokens);

// Batch inference over independent sentences; the parallel kernel and its
// serial reference must agree exactly.
std::vector<LabeledSentence> predict_batch(const TaggerModel& model,
                                           const std::vector<std::vector<std::string>>& sentences);
std::vector<LabeledSentence> predict_batch_serial(const TaggerModel& model,
                                                  const std::vector<std::vector<std::string>>& sentences);

struct TrainResult {
  TaggerModel model;
  std::vector<double> loss_history;  // token-weighted mean loss per epoch
};

// Mini-batch SGD, examples shuffled each epoch from cfg.seed. Single-threaded
// so that the result is bit-reproducible.
TrainResult train(TaggerModel model, const std::vector<LabeledSentence>& dataset, const TrainConfig& cfg);

// Mean token loss of one sentence.
double sentence_loss(const TaggerModel& model, const LabeledSentence& example, const LossKind& kind);

// Backprop gradient of sentence_loss, same layout as the model parameters.
TaggerModel sentence_gradient(const TaggerModel& model, const LabeledSentence& example, const LossKind& kind);

// Max over all parameters of |analytic - numeric| / max(|analytic|, |numeric|, 1e-6),
// numeric from central differences with h = 1e-5.
double gradient_check(const TaggerModel& model, const LabeledSentence& example, const LossKind& kind);

// Copies the teacher's parameters into a model over new_vocab. Rows for words
// both vocabularies share (and PAD/UNK) are copied; new words get seeded
// uniform [-0.1, 0.1] embeddings.
TaggerModel remap_vocab(const TaggerModel& teacher, Vocab new_vocab, std::uint64_t seed);

// Binary container: "XNFT", u32 version, config, then little-endian f64
// parameter blocks in declaration order. The vocab lives in a sidecar.
std::string serialize_model(const TaggerModel& model);
TaggerModel deserialize_model(std::string_view bytes, Vocab vocab);

void save_model(const TaggerModel& model, const std::string& path);  // writes path and path + ".vocab"
TaggerModel load_model(const std::string& path);

}  // namespace xnf
