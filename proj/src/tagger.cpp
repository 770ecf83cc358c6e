#include "xnf/tagger.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <map>

#include "tagger_kernels.hpp"
#include "xnf/error.hpp"
#include "xnf/rng.hpp"
#include "xnf/spans.hpp"
#include "xnf/text.hpp"

namespace xnf {

// ---------------------------------------------------------------- Vocab

Vocab::Vocab() {
  push(std::string(kPadWord));
  push(std::string(kUnkWord));
}

void Vocab::push(std::string word) {
  index_.emplace(word, words_.size());
  words_.push_back(std::move(word));
}

Vocab Vocab::build(const std::vector<std::vector<std::string>>& sentences, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : sentences) {
    for (const auto& tok : s) ++counts[tok];
  }
  if (counts.empty()) throw Error(ErrorKind::EmptyCorpus, "cannot build a vocabulary from no tokens");
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocab v;
  for (auto& [word, count] : ranked) {
    if (count < min_count) continue;
    if (word == kPadWord || word == kUnkWord) continue;
    v.push(word);
  }
  return v;
}

Vocab build_vocab(const std::vector<LabeledSentence>& corpus, std::size_t min_count) {
  if (corpus.empty()) throw Error(ErrorKind::EmptyCorpus, "no sentences");
  std::vector<std::vector<std::string>> tokens;
  tokens.reserve(corpus.size());
  for (const auto& s : corpus) tokens.push_back(s.tokens);
  return Vocab::build(tokens, min_count);
}

std::size_t Vocab::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnk : it->second;
}

std::vector<std::size_t> Vocab::encode(const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::string Vocab::to_tsv() const {
  std::string out;
  for (std::size_t i = 0; i < words_.size(); ++i) {
    out += words_[i];
    out += '\t';
    out += std::to_string(i);
    out += '\n';
  }
  return out;
}

Vocab Vocab::from_tsv(std::string_view text) {
  Vocab v;
  v.words_.clear();
  v.index_.clear();
  auto lines = text::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto tab = lines[i].find('\t');
    if (tab == std::string_view::npos) throw ParseError(ErrorKind::MalformedLine, i + 1, "expected word<TAB>id");
    std::string word(lines[i].substr(0, tab));
    std::size_t id = 0;
    try {
      id = std::stoul(std::string(lines[i].substr(tab + 1)));
    } catch (const std::exception&) {
      throw ParseError(ErrorKind::MalformedLine, i + 1, "bad id");
    }
    if (id != v.words_.size()) throw ParseError(ErrorKind::Format, i + 1, "ids must be dense and ordered");
    v.push(std::move(word));
  }
  if (v.words_.size() < 2 || v.words_[kPad] != kPadWord || v.words_[kUnk] != kUnkWord) {
    throw Error(ErrorKind::Format, "vocab must start with <pad> and <unk>");
  }
  return v;
}

// ---------------------------------------------------------------- config

std::vector<std::string> TaggerConfig::labels_for(const TypeSet& types) {
  std::vector<std::string> labels{"O"};
  for (const auto& t : types.names()) {
    labels.push_back(begin_tag(t));
    labels.push_back(inside_tag(t));
  }
  return labels;
}

void TaggerConfig::validate() const {
  if (embed_dim < 1 || hidden_dim < 1) throw Error(ErrorKind::InvalidSpec, "tagger dims must be >= 1");
  if (std::find(labels.begin(), labels.end(), "O") == labels.end()) {
    throw Error(ErrorKind::InvalidSpec, "label set must include O");
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorKind::InvalidSpec, "learning rate must be finite and non-negative");
  }
  if (epochs < 1) throw Error(ErrorKind::InvalidSpec, "epochs must be >= 1");
  if (batch_size < 1) throw Error(ErrorKind::InvalidSpec, "batch size must be >= 1");
  loss.validate();
}

// ---------------------------------------------------------------- model

TaggerModel::TaggerModel(TaggerConfig cfg, Vocab v) : config(std::move(cfg)), vocab(std::move(v)) {
  config.validate();
  const std::size_t L = config.labels.size();
  embeddings.assign(vocab.size() * config.embed_dim, 0.0);
  hidden_w.assign(config.input_dim() * config.hidden_dim, 0.0);
  hidden_b.assign(config.hidden_dim, 0.0);
  output_w.assign(config.hidden_dim * L, 0.0);
  output_b.assign(L, 0.0);
}

TaggerModel TaggerModel::initialized(TaggerConfig cfg, Vocab v) {
  TaggerModel m(std::move(cfg), std::move(v));
  Rng rng(m.config.seed);
  for (auto& x : m.embeddings) x = rng.uniform(-0.1, 0.1);
  const double a1 = std::sqrt(6.0 / static_cast<double>(m.config.input_dim() + m.config.hidden_dim));
  for (auto& x : m.hidden_w) x = rng.uniform(-a1, a1);
  const double a2 = std::sqrt(6.0 / static_cast<double>(m.config.hidden_dim + m.num_labels()));
  for (auto& x : m.output_w) x = rng.uniform(-a2, a2);
  return m;
}

std::size_t TaggerModel::label_id(std::string_view tag) const {
  auto it = std::find(config.labels.begin(), config.labels.end(), tag);
  if (it == config.labels.end()) throw Error(ErrorKind::UnknownTag, "label '" + std::string(tag) + "' not in model");
  return static_cast<std::size_t>(it - config.labels.begin());
}

std::size_t TaggerModel::parameter_count() const {
  return embeddings.size() + hidden_w.size() + hidden_b.size() + output_w.size() + output_b.size();
}

std::vector<std::span<double>> TaggerModel::parameter_blocks() {
  return {embeddings, hidden_w, hidden_b, output_w, output_b};
}

std::vector<std::span<const double>> TaggerModel::parameter_blocks() const {
  return {embeddings, hidden_w, hidden_b, output_w, output_b};
}

// ---------------------------------------------------------------- inference

std::vector<std::vector<double>> forward(const TaggerModel& model, const std::vector<std::string>& tokens) {
  detail::Workspace ws(model.config);
  auto ids = model.vocab.encode(tokens);
  std::vector<std::vector<double>> out;
  out.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    detail::token_forward(model, ids, i, ws);
    out.push_back(ws.probs);
  }
  return out;
}

LabeledSentence detail::predict_with(const TaggerModel& m, const std::vector<std::string>& tokens, Workspace& ws) {
  auto ids = m.vocab.encode(tokens);
  LabeledSentence out;
  out.tokens = tokens;
  out.tags.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    token_forward(m, ids, i, ws);
    out.tags.push_back(m.config.labels[argmax_label(ws.probs)]);
  }
  out.tags = repair_iob2(std::move(out.tags));
  return out;
}

LabeledSentence predict(const TaggerModel& model, const std::vector<std::string>& tokens) {
  detail::Workspace ws(model.config);
  return detail::predict_with(model, tokens, ws);
}

// ---------------------------------------------------------------- training

namespace {

struct Encoded {
  std::vector<std::size_t> ids;
  std::vector<std::size_t> labels;
};

Encoded encode_example(const TaggerModel& m, const LabeledSentence& s) {
  if (s.tokens.size() != s.tags.size()) throw Error(ErrorKind::ShapeMismatch, "tokens and tags differ in length");
  Encoded e{m.vocab.encode(s.tokens), {}};
  e.labels.reserve(s.tags.size());
  for (const auto& t : s.tags) e.labels.push_back(m.label_id(t));
  return e;
}

// Accumulates scale * dLoss/dparam for every token of ex into grads and
// returns the summed (unscaled) token loss. Embedding rows touched are
// appended to touched (may repeat).
double accumulate(const TaggerModel& m, const Encoded& ex, const LossKind& kind, double scale, bool skip_embeddings,
                  TaggerModel& grads, std::vector<std::size_t>& touched, detail::Workspace& ws) {
  const auto& c = m.config;
  const std::size_t E = c.embed_dim;
  const std::size_t H = c.hidden_dim;
  const std::size_t L = c.labels.size();
  const std::size_t D = c.input_dim();
  const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(c.window);
  double total = 0.0;

  for (std::size_t i = 0; i < ex.ids.size(); ++i) {
    detail::token_forward(m, ex.ids, i, ws);
    total += loss_and_gradient(ws.probs, ex.labels[i], kind, scale, ws.grad_z);

    for (std::size_t l = 0; l < L; ++l) grads.output_b[l] += ws.grad_z[l];
    for (std::size_t j = 0; j < H; ++j) {
      const double hj = ws.h[j];
      double* grow = &grads.output_w[j * L];
      const double* wrow = &m.output_w[j * L];
      double back = 0.0;
      for (std::size_t l = 0; l < L; ++l) {
        grow[l] += hj * ws.grad_z[l];
        back += wrow[l] * ws.grad_z[l];
      }
      ws.grad_a[j] = back * (1.0 - hj * hj);
    }
    for (std::size_t j = 0; j < H; ++j) grads.hidden_b[j] += ws.grad_a[j];
    for (std::size_t d = 0; d < D; ++d) {
      const double xd = ws.x[d];
      double* grow = &grads.hidden_w[d * H];
      const double* wrow = &m.hidden_w[d * H];
      double back = 0.0;
      for (std::size_t j = 0; j < H; ++j) {
        grow[j] += xd * ws.grad_a[j];
        back += wrow[j] * ws.grad_a[j];
      }
      ws.grad_x[d] = back;
    }
    if (skip_embeddings) continue;
    for (std::ptrdiff_t k = -w; k <= w; ++k) {
      const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(i) + k;
      const std::size_t id = (pos < 0 || pos >= static_cast<std::ptrdiff_t>(ex.ids.size()))
                                 ? Vocab::kPad
                                 : ex.ids[static_cast<std::size_t>(pos)];
      double* grow = &grads.embeddings[id * E];
      const double* src = &ws.grad_x[static_cast<std::size_t>(k + w) * E];
      for (std::size_t e = 0; e < E; ++e) grow[e] += src[e];
      touched.push_back(id);
    }
  }
  return total;
}

void zero(std::vector<double>& v) { std::fill(v.begin(), v.end(), 0.0); }

}  // namespace

TrainResult train(TaggerModel model, const std::vector<LabeledSentence>& dataset, const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.empty()) throw Error(ErrorKind::EmptyCorpus, "training set is empty");
  std::vector<Encoded> data;
  data.reserve(dataset.size());
  for (const auto& s : dataset) {
    if (!s.tokens.empty()) data.push_back(encode_example(model, s));
  }
  if (data.empty()) throw Error(ErrorKind::EmptyCorpus, "training set has no tokens");

  TaggerModel grads(model.config, model.vocab);
  detail::Workspace ws(model.config);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<std::size_t> touched;
  const std::size_t E = model.config.embed_dim;
  const double lr = cfg.learning_rate;
  Rng rng(cfg.seed);
  TrainResult result{model, {}};
  TaggerModel& m = result.model;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double epoch_loss = 0.0;
    std::size_t epoch_tokens = 0;
    std::size_t batch_index = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size, ++batch_index) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      std::size_t tokens = 0;
      for (std::size_t k = b; k < e; ++k) tokens += data[order[k]].ids.size();
      const double scale = 1.0 / static_cast<double>(tokens);

      zero(grads.hidden_w);
      zero(grads.hidden_b);
      zero(grads.output_w);
      zero(grads.output_b);
      for (std::size_t id : touched) std::fill_n(&grads.embeddings[id * E], E, 0.0);
      touched.clear();

      double batch_sum = 0.0;
      for (std::size_t k = b; k < e; ++k) {
        batch_sum += accumulate(m, data[order[k]], cfg.loss, scale, cfg.freeze_embeddings, grads, touched, ws);
      }
      if (!std::isfinite(batch_sum)) {
        throw Error(ErrorKind::NonFiniteLoss,
                    "epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_index));
      }
      epoch_loss += batch_sum;
      epoch_tokens += tokens;

      auto step = [lr](std::vector<double>& p, const std::vector<double>& g) {
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
      };
      step(m.hidden_w, grads.hidden_w);
      step(m.hidden_b, grads.hidden_b);
      step(m.output_w, grads.output_w);
      step(m.output_b, grads.output_b);
      if (!cfg.freeze_embeddings) {
        std::sort(touched.begin(), touched.end());
        touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
        for (std::size_t id : touched) {
          double* p = &m.embeddings[id * E];
          const double* g = &grads.embeddings[id * E];
          for (std::size_t k = 0; k < E; ++k) p[k] -= lr * g[k];
        }
      }
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(epoch_tokens));
  }
  return result;
}

double sentence_loss(const TaggerModel& model, const LabeledSentence& example, const LossKind& kind) {
  auto ex = encode_example(model, example);
  if (ex.ids.empty()) throw Error(ErrorKind::AllMasked, "empty sentence");
  detail::Workspace ws(model.config);
  double total = 0.0;
  for (std::size_t i = 0; i < ex.ids.size(); ++i) {
    detail::token_forward(model, ex.ids, i, ws);
    total += token_loss(ws.probs, ex.labels[i], kind);
  }
  return total / static_cast<double>(ex.ids.size());
}

TaggerModel sentence_gradient(const TaggerModel& model, const LabeledSentence& example, const LossKind& kind) {
  auto ex = encode_example(model, example);
  if (ex.ids.empty()) throw Error(ErrorKind::AllMasked, "empty sentence");
  TaggerModel grads(model.config, model.vocab);
  detail::Workspace ws(model.config);
  std::vector<std::size_t> touched;
  accumulate(model, ex, kind, 1.0 / static_cast<double>(ex.ids.size()), false, grads, touched, ws);
  return grads;
}

double gradient_check(const TaggerModel& model, const LabeledSentence& example, const LossKind& kind) {
  constexpr double h = 1e-5;
  const TaggerModel analytic = sentence_gradient(model, example, kind);
  TaggerModel probe = model;
  auto blocks = probe.parameter_blocks();
  auto grad_blocks = analytic.parameter_blocks();
  double worst = 0.0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (std::size_t i = 0; i < blocks[b].size(); ++i) {
      const double saved = blocks[b][i];
      blocks[b][i] = saved + h;
      const double up = sentence_loss(probe, example, kind);
      blocks[b][i] = saved - h;
      const double down = sentence_loss(probe, example, kind);
      blocks[b][i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = grad_blocks[b][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

TaggerModel remap_vocab(const TaggerModel& teacher, Vocab new_vocab, std::uint64_t seed) {
  TaggerModel student(teacher.config, std::move(new_vocab));
  student.hidden_w = teacher.hidden_w;
  student.hidden_b = teacher.hidden_b;
  student.output_w = teacher.output_w;
  student.output_b = teacher.output_b;
  const std::size_t E = teacher.config.embed_dim;
  Rng rng(seed);
  for (std::size_t id = 0; id < student.vocab.size(); ++id) {
    const auto& word = student.vocab.word(id);
    double* dst = &student.embeddings[id * E];
    if (id < 2 || teacher.vocab.contains(word)) {
      const std::size_t src = id < 2 ? id : teacher.vocab.id(word);
      std::copy_n(&teacher.embeddings[src * E], E, dst);
    } else {
      for (std::size_t e = 0; e < E; ++e) dst[e] = rng.uniform(-0.1, 0.1);
    }
  }
  return student;
}

// ---------------------------------------------------------------- serialization

namespace {

constexpr char kMagic[4] = {'X', 'N', 'F', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorKind::Format, "truncated model file");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_model(const TaggerModel& m) {
  std::string out(kMagic, 4);
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(m.config.embed_dim));
  put_u32(out, static_cast<std::uint32_t>(m.config.window));
  put_u32(out, static_cast<std::uint32_t>(m.config.hidden_dim));
  put_u64(out, m.config.seed);
  put_u32(out, static_cast<std::uint32_t>(m.config.labels.size()));
  for (const auto& l : m.config.labels) {
    put_u32(out, static_cast<std::uint32_t>(l.size()));
    out += l;
  }
  put_u64(out, m.vocab.size());
  for (auto block : m.parameter_blocks()) {
    for (double v : block) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

TaggerModel deserialize_model(std::string_view bytes, Vocab vocab) {
  Reader r(bytes);
  if (r.str(4) != std::string_view(kMagic, 4)) throw Error(ErrorKind::Format, "not an XNFT model");
  const auto version = r.uint(4);
  if (version != kFormatVersion) throw Error(ErrorKind::Format, "unsupported model version " + std::to_string(version));
  TaggerConfig cfg;
  cfg.embed_dim = r.uint(4);
  cfg.window = r.uint(4);
  cfg.hidden_dim = r.uint(4);
  cfg.seed = r.uint(8);
  const auto n_labels = r.uint(4);
  cfg.labels.clear();
  for (std::uint64_t i = 0; i < n_labels; ++i) cfg.labels.push_back(r.str(r.uint(4)));
  const auto vocab_size = r.uint(8);
  if (vocab_size != vocab.size()) {
    throw Error(ErrorKind::Format, "model expects " + std::to_string(vocab_size) + " words, vocab has " +
                                       std::to_string(vocab.size()));
  }
  TaggerModel m(std::move(cfg), std::move(vocab));
  for (auto block : m.parameter_blocks()) {
    for (double& v : block) v = std::bit_cast<double>(r.uint(8));
  }
  if (!r.done()) throw Error(ErrorKind::Format, "trailing bytes in model file");
  return m;
}

void save_model(const TaggerModel& model, const std::string& path) {
  text::write_file(path, serialize_model(model));
  text::write_file(path + ".vocab", model.vocab.to_tsv());
}

TaggerModel load_model(const std::string& path) {
  Vocab vocab = Vocab::from_tsv(text::read_file(path + ".vocab"));
  return deserialize_model(text::read_file(path), std::move(vocab));
}

}  // namespace xnf
