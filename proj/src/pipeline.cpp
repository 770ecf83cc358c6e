#include "xnf/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <memory>
#include <set>

#include "xnf/config_json.hpp"
#include "xnf/error.hpp"
#include "xnf/hash.hpp"
#include "xnf/log.hpp"
#include "xnf/rng.hpp"
#include "xnf/text.hpp"

namespace fs = std::filesystem;

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

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::Config, where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw Error(ErrorKind::Config, "unknown field '" + k + "' in " + where);
  }
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Write to a sibling temp file, then rename, so a failed run never leaves a
// half-written artifact in place.
void write_atomic(const std::string& path, std::string_view content) {
  const std::string tmp = path + ".tmp";
  text::write_file(tmp, content);
  fs::rename(tmp, path);
}

void save_model_atomic(const TaggerModel& model, const std::string& path) {
  const std::string tmp = path + ".tmp";
  save_model(model, tmp);
  fs::rename(tmp + ".vocab", path + ".vocab");
  fs::rename(tmp, path);
}

std::string file_hash(const std::string& path) { return git_blob_hash(text::read_file(path)); }

std::string outputs_hash(const std::vector<std::string>& outputs) {
  std::string acc;
  for (const auto& p : outputs) acc += file_hash(p) + "\n";
  return git_blob_hash(acc);
}

std::string json_hash(const json& j) { return git_blob_hash(j.dump()); }

bool all_exist(const std::vector<std::string>& paths) {
  return std::all_of(paths.begin(), paths.end(), [](const std::string& p) { return fs::exists(p); });
}

// Stage cache check: same inputs and the recorded outputs are untouched.
bool stage_current(const std::string& stage_path, const std::map<std::string, std::string>& inputs,
                   const std::vector<std::string>& outputs, const RunOptions& opts) {
  if (opts.force) return false;
  const auto prev = read_stage(stage_path);
  if (!prev || prev->input_hashes != inputs || !all_exist(outputs)) return false;
  return prev->content_hash == outputs_hash(outputs);
}

void finish_stage(int stage, const std::string& stage_path, const std::map<std::string, std::string>& inputs,
                  const std::vector<std::string>& outputs) {
  write_stage(stage_path, StageArtifact{stage, outputs_hash(outputs), utc_now(), inputs});
}

TypeSet types_of(const TaggerConfig& arch) {
  std::vector<std::string> names;
  for (const auto& label : arch.labels) {
    const auto t = parse_tag(label);
    if (t && t->prefix == TagPrefix::Begin) names.push_back(t->type);
  }
  return TypeSet(names);
}

std::vector<LabeledSentence> read_conll_file(const std::string& path, const TypeSet& types) {
  try {
    return parse_conll(text::read_file(path), types);
  } catch (const ParseError& e) {
    throw Error(e.kind(), path + ": " + e.detail());
  }
}

std::string write_lines(const std::vector<std::vector<std::string>>& sentences) {
  std::string out;
  for (const auto& s : sentences) out += text::join(s) + "\n";
  return out;
}

std::string domain_file(const std::string& domain) {
  std::string safe;
  for (char c : domain) safe += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return safe;
}

std::unique_ptr<Aligner> make_aligner(const PipelineConfig& cfg, const PipelinePaths& paths) {
  if (cfg.aligner == "remote") {
    return std::make_unique<RemoteAligner>(
        cfg.endpoint, std::chrono::milliseconds(static_cast<long long>(cfg.timeout_seconds * 1000.0)),
        cfg.max_in_flight);
  }
  require_path("paths.lexicon", paths.lexicon);
  return std::make_unique<LexicalAligner>(Lexicon::from_tsv(text::read_file(paths.lexicon)), cfg.aligner_config);
}

// ------------------------------------------------------------ partial datasets

json entity_json(const ProjectedEntity& e) {
  return json{{"start", e.target.start},   {"end", e.target.end},     {"type", e.target.type},
              {"surface", e.target.surface}, {"source", e.source_surface}, {"score", e.score}};
}

ProjectedEntity entity_from(const json& j) {
  ProjectedEntity e;
  e.target.start = j.at("start").get<std::size_t>();
  e.target.end = j.at("end").get<std::size_t>();
  e.target.type = j.at("type").get<std::string>();
  e.target.surface = j.at("surface").get<std::string>();
  e.source_surface = j.at("source").get<std::string>();
  e.score = j.at("score").get<double>();
  return e;
}

json stats_core_json(const ProjectionStats& s) {
  json discarded = json::object();
  for (auto r : {DiscardReason::AlignmentFailure, DiscardReason::Overlap, DiscardReason::InconsistentMultiMap}) {
    auto it = s.discarded.find(r);
    discarded[std::string(to_string(r))] = it == s.discarded.end() ? 0 : it->second;
  }
  return json{{"processed", s.processed},
              {"kept", s.kept},
              {"kept_empty", s.kept_empty},
              {"discarded", discarded},
              {"discarded_total", s.discarded_total()},
              {"entity_counts", s.entity_counts}};
}

ProjectionStats stats_from(const json& j) {
  ProjectionStats s;
  s.processed = j.at("processed").get<std::size_t>();
  s.kept = j.at("kept").get<std::size_t>();
  s.kept_empty = j.at("kept_empty").get<std::size_t>();
  for (auto r : {DiscardReason::AlignmentFailure, DiscardReason::Overlap, DiscardReason::InconsistentMultiMap}) {
    const auto n = j.at("discarded").value(std::string(to_string(r)), std::size_t{0});
    if (n > 0) s.discarded[r] = n;
  }
  s.entity_counts = j.at("entity_counts").get<std::map<std::string, std::map<std::string, std::size_t>>>();
  return s;
}

json dataset_json(const PseudoDataset& d) {
  json sentences = json::array();
  for (const auto& s : d.sentences) {
    json ents = json::array();
    for (const auto& e : s.entities) ents.push_back(entity_json(e));
    sentences.push_back(json{{"pair_id", s.pair_id},
                             {"domain", s.domain},
                             {"tokens", s.sentence.tokens},
                             {"tags", s.sentence.tags},
                             {"entities", ents}});
  }
  return json{{"cursor", d.cursor}, {"stats", stats_core_json(d.stats)}, {"sentences", sentences}};
}

PseudoDataset dataset_from(const json& j) {
  PseudoDataset d;
  d.cursor = j.at("cursor").get<std::size_t>();
  d.stats = stats_from(j.at("stats"));
  for (const auto& s : j.at("sentences")) {
    PseudoLabeledSentence p;
    p.pair_id = s.at("pair_id").get<std::uint64_t>();
    p.domain = s.at("domain").get<std::string>();
    p.sentence.tokens = s.at("tokens").get<std::vector<std::string>>();
    p.sentence.tags = s.at("tags").get<std::vector<std::string>>();
    for (const auto& e : s.at("entities")) p.entities.push_back(entity_from(e));
    d.sentences.push_back(std::move(p));
  }
  return d;
}

}  // namespace

// ------------------------------------------------------------ config

TrainConfig PipelineConfig::default_teacher() {
  TrainConfig c;
  c.loss = LossKind::focal(2.0);
  c.epochs = 5;
  c.learning_rate = 1.0;
  return c;
}

TrainConfig PipelineConfig::default_student() {
  TrainConfig c;
  c.loss = LossKind::reweighted(4.0);
  c.epochs = 5;
  c.learning_rate = 2.0;
  return c;
}

void PipelineConfig::validate() const {
  arch.validate();
  teacher.validate();
  student.validate();
  if (aligner != "lexical" && aligner != "remote") {
    throw Error(ErrorKind::Config, "aligner.kind must be 'lexical' or 'remote', got '" + aligner + "'");
  }
  if (aligner == "remote" && endpoint.empty()) throw Error(ErrorKind::Config, "aligner.endpoint is required for remote");
  if (aligner == "remote" && (timeout_seconds <= 0 || max_in_flight == 0)) {
    throw Error(ErrorKind::Config, "aligner.timeout_seconds and aligner.max_in_flight must be positive");
  }
  if (!(empty_ratio >= 0.0 && empty_ratio < 1.0)) throw Error(ErrorKind::Config, "projection.empty_ratio must be in [0, 1)");
  if (sample_n && *sample_n == 0) throw Error(ErrorKind::Config, "projection.sample_n must be positive");
  if (paths.out_dir.empty()) throw Error(ErrorKind::Config, "paths.out_dir is empty");
  synth.spec.validate();
  if (synth.domains.empty()) throw Error(ErrorKind::Config, "synth.domains is empty");
  std::set<std::string> seen;
  for (const auto& d : synth.domains) {
    if (d.name.empty() || !seen.insert(d.name).second) throw Error(ErrorKind::Config, "synth.domains: bad or duplicate name");
  }
}

void PipelineConfig::apply_seed() {
  arch.seed = seed;
  teacher.seed = seed;
  student.seed = seed;
}

void to_json(json& j, const PipelineConfig& c) {
  json parallel = json::object();
  for (const auto& [d, p] : c.paths.parallel) parallel[d] = json{{"source", p.source}, {"target", p.target}};
  json domains = json::array();
  for (const auto& d : c.synth.domains) {
    json w = json::array();
    for (const auto& [name, x] : d.type_weights) w.push_back({name, x});
    domains.push_back(json{{"name", d.name}, {"pairs", d.pairs}, {"type_weights", w}});
  }
  j = json{{"paths",
            {{"source_train", c.paths.source_train},
             {"source_test", c.paths.source_test},
             {"parallel", parallel},
             {"target_test", c.paths.target_test},
             {"lexicon", c.paths.lexicon},
             {"out_dir", c.paths.out_dir}}},
           {"arch", c.arch},
           {"teacher", c.teacher},
           {"student", c.student},
           {"aligner",
            {{"kind", c.aligner},
             {"threshold", c.aligner_config.threshold},
             {"max_span_len", c.aligner_config.max_span_len},
             {"tie_epsilon", c.aligner_config.tie_epsilon},
             {"endpoint", c.endpoint},
             {"timeout_seconds", c.timeout_seconds},
             {"max_in_flight", c.max_in_flight}}},
           {"projection",
            {{"suppress_misc", c.suppress_misc},
             {"empty_ratio", c.empty_ratio},
             {"sample_n", c.sample_n ? json(*c.sample_n) : json(nullptr)}}},
           {"seed", c.seed},
           {"synth",
            {{"spec", c.synth.spec},
             {"source_train", c.synth.source_train},
             {"source_test", c.synth.source_test},
             {"target_test", c.synth.target_test},
             {"domains", domains}}}};
}

void from_json(const json& j, PipelineConfig& c) {
  reject_unknown(j, {"paths", "arch", "teacher", "student", "aligner", "projection", "seed", "synth"}, "config");
  try {
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      reject_unknown(p, {"source_train", "source_test", "parallel", "target_test", "lexicon", "out_dir"}, "paths");
      read(p, "source_train", c.paths.source_train);
      read(p, "source_test", c.paths.source_test);
      read(p, "lexicon", c.paths.lexicon);
      read(p, "out_dir", c.paths.out_dir);
      read(p, "target_test", c.paths.target_test);
      if (p.contains("parallel")) {
        c.paths.parallel.clear();
        for (const auto& [d, v] : p.at("parallel").items()) {
          c.paths.parallel[d] = ParallelPaths{v.at("source").get<std::string>(), v.at("target").get<std::string>()};
        }
      }
    }
    if (j.contains("arch")) c.arch = j.at("arch").get<TaggerConfig>();
    if (j.contains("teacher")) from_json(j.at("teacher"), c.teacher);
    if (j.contains("student")) from_json(j.at("student"), c.student);
    if (j.contains("aligner")) {
      const auto& a = j.at("aligner");
      reject_unknown(a, {"kind", "threshold", "max_span_len", "tie_epsilon", "endpoint", "timeout_seconds", "max_in_flight"},
                     "aligner");
      read(a, "kind", c.aligner);
      from_json(a, c.aligner_config);
      read(a, "endpoint", c.endpoint);
      read(a, "timeout_seconds", c.timeout_seconds);
      read(a, "max_in_flight", c.max_in_flight);
    }
    if (j.contains("projection")) {
      const auto& p = j.at("projection");
      reject_unknown(p, {"suppress_misc", "empty_ratio", "sample_n"}, "projection");
      read(p, "suppress_misc", c.suppress_misc);
      read(p, "empty_ratio", c.empty_ratio);
      if (p.contains("sample_n")) {
        if (p.at("sample_n").is_null()) {
          c.sample_n.reset();
        } else {
          std::size_t n = 0;
          read(p, "sample_n", n);
          c.sample_n = n;
        }
      }
    }
    read(j, "seed", c.seed);
    if (j.contains("synth")) {
      const auto& s = j.at("synth");
      reject_unknown(s, {"spec", "source_train", "source_test", "target_test", "domains"}, "synth");
      if (s.contains("spec")) from_json(s.at("spec"), c.synth.spec);
      read(s, "source_train", c.synth.source_train);
      read(s, "source_test", c.synth.source_test);
      read(s, "target_test", c.synth.target_test);
      if (s.contains("domains")) {
        c.synth.domains.clear();
        for (const auto& d : s.at("domains")) {
          SynthDomain sd;
          sd.name = d.at("name").get<std::string>();
          sd.pairs = d.at("pairs").get<std::size_t>();
          if (d.contains("type_weights")) {
            SynthSpec tmp;
            from_json(json{{"type_weights", d.at("type_weights")}}, tmp);
            sd.type_weights = tmp.type_weights;
          }
          c.synth.domains.push_back(std::move(sd));
        }
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, std::string("config: ") + e.what());
  }
}

PipelineConfig load_pipeline_config(const std::optional<std::string>& path) {
  PipelineConfig cfg;
  if (path) {
    if (!fs::exists(*path)) throw Error(ErrorKind::Config, "config file not found: " + *path);
    json j;
    try {
      j = json::parse(text::read_file(*path));
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::Config, *path + ": " + e.what());
    }
    from_json(j, cfg);
  }
  return cfg;
}

PipelinePaths resolve_paths(const PipelineConfig& cfg) {
  PipelinePaths p = cfg.paths;
  const std::string synth = RunLayout{p.out_dir}.synth_dir();
  if (p.source_train.empty()) p.source_train = synth + "/source_train.conll";
  if (p.source_test.empty()) p.source_test = synth + "/source_test.conll";
  if (p.lexicon.empty()) p.lexicon = synth + "/lexicon.tsv";
  if (p.parallel.empty()) {
    for (const auto& d : cfg.synth.domains) {
      const std::string base = synth + "/parallel/" + domain_file(d.name);
      p.parallel[d.name] = ParallelPaths{base + ".src", base + ".tgt"};
    }
  }
  if (p.target_test.empty()) {
    for (const auto& d : cfg.synth.domains) p.target_test[d.name] = synth + "/target_test/" + domain_file(d.name) + ".conll";
  }
  return p;
}

void require_path(const std::string& field, const std::string& path) {
  if (path.empty()) throw Error(ErrorKind::Config, field + ": path not set");
  if (!fs::exists(path)) throw Error(ErrorKind::Config, field + ": no such file: " + path);
}

// ------------------------------------------------------------ stage records

void to_json(json& j, const StageArtifact& a) {
  j = json{{"stage", a.stage}, {"content_hash", a.content_hash}, {"timestamp", a.timestamp},
           {"input_hashes", a.input_hashes}};
}

void from_json(const json& j, StageArtifact& a) {
  a.stage = j.at("stage").get<int>();
  a.content_hash = j.at("content_hash").get<std::string>();
  a.timestamp = j.at("timestamp").get<std::string>();
  a.input_hashes = j.at("input_hashes").get<std::map<std::string, std::string>>();
}

std::optional<StageArtifact> read_stage(const std::string& path) {
  if (!fs::exists(path)) return std::nullopt;
  try {
    return json::parse(text::read_file(path)).get<StageArtifact>();
  } catch (const json::exception&) {
    return std::nullopt;  // unreadable record just means "not cached"
  }
}

void write_stage(const std::string& path, const StageArtifact& a) { write_atomic(path, json(a).dump(2) + "\n"); }

RunLock::RunLock(const std::string& dir) : path_(dir + "/.lock") {
  fs::create_directories(dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) {
      throw Error(ErrorKind::Io, "run directory is locked by another run: " + path_ +
                                     " (remove it if no other run is active)");
    }
    throw Error(ErrorKind::Io, "cannot create lock " + path_ + ": " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

// ------------------------------------------------------------ synth

StageResult cmd_synth(const PipelineConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  const RunLayout layout{cfg.paths.out_dir};
  const std::string dir = layout.synth_dir();
  json settings = cfg.synth.spec;
  settings["seed"] = cfg.seed;
  json sizes = json{{"source_train", cfg.synth.source_train}, {"source_test", cfg.synth.source_test},
                    {"target_test", cfg.synth.target_test}};
  json domains = json::array();
  for (const auto& d : cfg.synth.domains) {
    json w = json::array();
    for (const auto& [n, x] : d.type_weights) w.push_back({n, x});
    domains.push_back({d.name, d.pairs, w});
  }
  const std::map<std::string, std::string> inputs = {
      {"synth", json_hash(json{{"spec", settings}, {"sizes", sizes}, {"domains", domains}})}};

  std::vector<std::string> outputs = {dir + "/source_train.conll", dir + "/source_test.conll", dir + "/lexicon.tsv"};
  for (const auto& d : cfg.synth.domains) {
    const std::string f = domain_file(d.name);
    outputs.push_back(dir + "/parallel/" + f + ".src");
    outputs.push_back(dir + "/parallel/" + f + ".tgt");
    outputs.push_back(dir + "/target_test/" + f + ".conll");
  }
  if (stage_current(dir + "/stage.json", inputs, outputs, opts)) {
    log::info("synth: inputs unchanged, skipping");
    return StageResult{true, outputs};
  }

  const std::uint64_t seed = cfg.seed;
  const SynthSpec& base = cfg.synth.spec;
  const auto train = gen_synthetic_corpus(base, cfg.synth.source_train, Rng::mix(seed, 1));
  const auto test = gen_synthetic_corpus(base, cfg.synth.source_test, Rng::mix(seed, 2));
  write_atomic(outputs[0], write_conll(train.source_gold));
  write_atomic(outputs[1], write_conll(test.source_gold));
  write_atomic(outputs[2], train.lexicon.to_tsv());

  std::size_t k = 3;
  for (std::size_t i = 0; i < cfg.synth.domains.size(); ++i) {
    const auto& d = cfg.synth.domains[i];
    SynthSpec spec = base;
    spec.domain = d.name;
    if (!d.type_weights.empty()) spec.type_weights = d.type_weights;
    const auto par = gen_synthetic_corpus(spec, d.pairs, Rng::mix(seed, 100 + i));
    const auto tst = gen_synthetic_corpus(spec, cfg.synth.target_test, Rng::mix(seed, 200 + i));
    std::vector<std::vector<std::string>> src, tgt;
    for (const auto& p : par.pairs) {
      src.push_back(p.source);
      tgt.push_back(p.target);
    }
    write_atomic(outputs[k++], write_lines(src));
    write_atomic(outputs[k++], write_lines(tgt));
    write_atomic(outputs[k++], write_conll(tst.target_gold));
    log::info("synth: domain ", d.name, ": ", d.pairs, " pairs, ", cfg.synth.target_test, " test sentences");
  }
  finish_stage(0, dir + "/stage.json", inputs, outputs);
  log::info("synth: wrote ", outputs.size(), " files under ", dir);
  return StageResult{false, outputs};
}

// ------------------------------------------------------------ stage 1

StageResult cmd_train_teacher(const PipelineConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  const auto paths = resolve_paths(cfg);
  require_path("paths.source_train", paths.source_train);
  const RunLayout layout{cfg.paths.out_dir};
  const TypeSet types = types_of(cfg.arch);

  std::map<std::string, std::string> inputs = {{"source_train", file_hash(paths.source_train)},
                                               {"arch", json_hash(json(cfg.arch))},
                                               {"teacher", json_hash(json(cfg.teacher))}};
  const bool has_test = fs::exists(paths.source_test);
  if (has_test) inputs["source_test"] = file_hash(paths.source_test);
  const std::string log_path = layout.root + "/teacher/train_log.json";
  const std::vector<std::string> outputs = {layout.teacher_model(), layout.teacher_model() + ".vocab", log_path};
  if (stage_current(layout.teacher_stage(), inputs, outputs, opts)) {
    log::info("train-teacher: inputs unchanged, skipping");
    return StageResult{true, outputs};
  }

  const auto data = read_conll_file(paths.source_train, types);
  log::info("train-teacher: ", data.size(), " sentences, loss ", cfg.teacher.loss.name(), ", ", cfg.teacher.epochs,
            " epochs");
  const auto init = TaggerModel::initialized(cfg.arch, build_vocab(data, 1));
  const auto result = train(init, data, cfg.teacher);
  for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
    log::debug("train-teacher: epoch ", e + 1, " loss ", result.loss_history[e]);
  }
  json tlog = {{"loss_history", result.loss_history}, {"sentences", data.size()}};
  if (has_test) {
    const auto report = evaluate_model(result.model, read_conll_file(paths.source_test, types));
    tlog["source_test"] = {{"precision", report.micro.precision},
                           {"recall", report.micro.recall},
                           {"f1", report.micro.f1}};
    log::info("train-teacher: held-out source F1 ", report.micro.f1);
  }
  fs::create_directories(fs::path(layout.teacher_model()).parent_path());
  save_model_atomic(result.model, layout.teacher_model());
  write_atomic(log_path, tlog.dump(2) + "\n");
  finish_stage(1, layout.teacher_stage(), inputs, outputs);
  return StageResult{false, outputs};
}

// ------------------------------------------------------------ stages 2-3

json stats_json(const ProjectionStats& stats, const DomainDatasets& balanced) {
  json j = stats_core_json(stats);
  json after = json::object();
  for (const auto& [d, sents] : balanced) {
    std::size_t empty = 0;
    for (const auto& s : sents) empty += s.is_empty() ? 1 : 0;
    after[d] = {{"sentences", sents.size()}, {"empty", empty}};
  }
  j["balanced"] = after;
  return j;
}

ReportTable counts_table(const ProjectionStats& stats, const TypeSet& types) {
  ReportTable t;
  t.title = "Projected entities by domain";
  t.row_header = "domain";
  t.columns = types.names();
  t.columns.push_back("All");
  t.kinds.assign(t.columns.size(), ReportTable::Kind::Count);
  for (const auto& [domain, by_type] : stats.entity_counts) {
    t.row_labels.push_back(domain);
    std::vector<double> row;
    double all = 0;
    for (const auto& type : types.names()) {
      auto it = by_type.find(type);
      const double n = it == by_type.end() ? 0.0 : static_cast<double>(it->second);
      row.push_back(n);
      all += n;
    }
    row.push_back(all);
    t.values.push_back(row);
  }
  return t;
}

StageResult cmd_project(const PipelineConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  const auto paths = resolve_paths(cfg);
  const RunLayout layout{cfg.paths.out_dir};
  require_path("teacher model (run train-teacher first)", layout.teacher_model());
  if (paths.parallel.empty()) throw Error(ErrorKind::Config, "paths.parallel: no parallel corpora configured");

  std::map<std::string, std::string> inputs = {{"teacher", file_hash(layout.teacher_model())}};
  for (const auto& [d, p] : paths.parallel) {
    require_path("paths.parallel." + d + ".source", p.source);
    require_path("paths.parallel." + d + ".target", p.target);
    inputs["parallel/" + d] = git_blob_hash(file_hash(p.source) + file_hash(p.target));
  }
  json settings = {{"aligner", cfg.aligner},          {"aligner_config", cfg.aligner_config},
                   {"endpoint", cfg.endpoint},        {"suppress_misc", cfg.suppress_misc},
                   {"empty_ratio", cfg.empty_ratio},  {"sample_n", cfg.sample_n ? json(*cfg.sample_n) : json(nullptr)},
                   {"seed", cfg.seed}};
  inputs["projection"] = json_hash(settings);
  if (cfg.aligner == "lexical") {
    require_path("paths.lexicon", paths.lexicon);
    inputs["lexicon"] = file_hash(paths.lexicon);
  }

  const std::string dir = layout.pseudo_dir();
  std::vector<std::string> outputs;
  for (const auto& [d, p] : paths.parallel) outputs.push_back(dir + "/" + domain_file(d) + ".conll");
  outputs.push_back(dir + "/stats.json");
  outputs.push_back(dir + "/counts.csv");
  outputs.push_back(dir + "/counts.md");
  if (stage_current(layout.pseudo_stage(), inputs, outputs, opts)) {
    log::info("project: inputs unchanged, skipping");
    return StageResult{true, outputs};
  }

  // 1. sampling
  std::vector<DomainCorpus> corpora;
  for (const auto& [d, p] : paths.parallel) {
    corpora.push_back(DomainCorpus{d, read_parallel(text::read_file(p.source), text::read_file(p.target), d)});
  }
  std::vector<ParallelPair> pairs;
  if (cfg.sample_n) {
    pairs = sample_equal_weights(corpora, *cfg.sample_n, cfg.seed);
  } else {
    for (const auto& c : corpora) pairs.insert(pairs.end(), c.pairs.begin(), c.pairs.end());
  }
  log::info("project: ", pairs.size(), " pairs from ", corpora.size(), " domain(s), aligner ", cfg.aligner);

  // 2. suppression and filters, resumable
  const auto teacher = load_model(layout.teacher_model());
  const auto aligner = make_aligner(cfg, paths);
  ProjectionConfig pcfg;
  if (cfg.suppress_misc) pcfg.suppress_types = {"MISC"};
  pcfg.empty_ratio = cfg.empty_ratio;

  const std::string inputs_key = json_hash(json(inputs));
  PseudoDataset resume;
  if (fs::exists(layout.cursor_file())) {
    const json c = json::parse(text::read_file(layout.cursor_file()));
    if (c.value("inputs", std::string()) == inputs_key) {
      resume = dataset_from(c.at("partial"));
      log::info("project: resuming at pair ", resume.cursor);
    } else {
      log::info("project: ignoring stale cursor file");
    }
  }
  PseudoDataset ds;
  try {
    ds = build_pseudo_dataset(pairs, teacher, *aligner, pcfg, std::move(resume));
  } catch (const ProjectionInterrupted& e) {
    write_atomic(layout.cursor_file(), json{{"inputs", inputs_key}, {"partial", dataset_json(e.partial())}}.dump() + "\n");
    throw Error(e.kind(), e.detail() + "; progress saved at pair " + std::to_string(e.partial().cursor) +
                              " in " + layout.cursor_file() + ", rerun to resume");
  }

  // 3. empty-ratio balancing
  const auto balanced = balance_empty_ratio(split_by_domain(ds.sentences), cfg.empty_ratio, cfg.seed);
  fs::create_directories(dir);
  std::size_t k = 0;
  for (const auto& [d, p] : paths.parallel) {
    auto it = balanced.find(d);
    const std::vector<LabeledSentence> sents =
        it == balanced.end() ? std::vector<LabeledSentence>{} : sentences_of(it->second);
    write_atomic(outputs[k++], write_conll(sents));
  }
  const TypeSet types = cfg.suppress_misc ? types_of(teacher.config).without("MISC") : types_of(teacher.config);
  write_atomic(outputs[k++], stats_json(ds.stats, balanced).dump(2) + "\n");
  const ReportTable counts = counts_table(ds.stats, types);
  write_atomic(outputs[k++], emit_report(counts, ReportFormat::Csv));
  write_atomic(outputs[k++], emit_report(counts, ReportFormat::Markdown));
  std::error_code ec;
  fs::remove(layout.cursor_file(), ec);
  finish_stage(3, layout.pseudo_stage(), inputs, outputs);

  log::info("project: processed ", ds.stats.processed, ", kept ", ds.stats.kept, " (", ds.stats.kept_empty,
            " empty), discarded ", ds.stats.discarded_total());
  return StageResult{false, outputs};
}

// ------------------------------------------------------------ stage 4

namespace {

std::map<std::string, std::vector<LabeledSentence>> load_pseudo(const PipelineConfig& cfg, const TypeSet& types) {
  const auto paths = resolve_paths(cfg);
  const RunLayout layout{cfg.paths.out_dir};
  if (!read_stage(layout.pseudo_stage())) {
    throw Error(ErrorKind::Config, "pseudo-labeled data missing (run project first): " + layout.pseudo_stage());
  }
  std::map<std::string, std::vector<LabeledSentence>> out;
  for (const auto& [d, p] : paths.parallel) {
    const std::string f = layout.pseudo_dir() + "/" + domain_file(d) + ".conll";
    require_path("pseudo data for " + d, f);
    const std::string body = text::read_file(f);
    out[d] = body.empty() ? std::vector<LabeledSentence>{} : parse_conll(body, types);
  }
  return out;
}

}  // namespace

StageResult cmd_finetune(const PipelineConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  const RunLayout layout{cfg.paths.out_dir};
  require_path("teacher model (run train-teacher first)", layout.teacher_model());
  const auto teacher = load_model(layout.teacher_model());
  const auto pseudo = load_pseudo(cfg, types_of(teacher.config));

  std::map<std::string, std::string> inputs = {{"teacher", file_hash(layout.teacher_model())},
                                               {"student", json_hash(json(cfg.student))}};
  for (const auto& [d, s] : pseudo) inputs["pseudo/" + d] = git_blob_hash(write_conll(s));
  const std::string log_path = layout.root + "/student/train_log.json";
  const std::vector<std::string> outputs = {layout.student_model(), layout.student_model() + ".vocab", log_path};
  if (stage_current(layout.student_stage(), inputs, outputs, opts)) {
    log::info("finetune: inputs unchanged, skipping");
    return StageResult{true, outputs};
  }

  std::vector<LabeledSentence> data;
  for (const auto& [d, s] : pseudo) data.insert(data.end(), s.begin(), s.end());
  if (data.empty()) throw Error(ErrorKind::EmptyCorpus, "no pseudo-labeled sentences to fine-tune on");
  log::info("finetune: ", data.size(), " sentences, loss ", cfg.student.loss.name(), " gamma ", cfg.student.loss.gamma,
            ", ", cfg.student.epochs, " epochs", cfg.student.freeze_embeddings ? ", embeddings frozen" : "");
  const auto init = remap_vocab(teacher, build_vocab(data, 1), cfg.student.seed);
  const auto result = train(init, data, cfg.student);
  for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
    log::debug("finetune: epoch ", e + 1, " loss ", result.loss_history[e]);
  }
  fs::create_directories(fs::path(layout.student_model()).parent_path());
  save_model_atomic(result.model, layout.student_model());
  write_atomic(log_path, json{{"loss_history", result.loss_history}, {"sentences", data.size()}}.dump(2) + "\n");
  finish_stage(4, layout.student_stage(), inputs, outputs);
  return StageResult{false, outputs};
}

// ------------------------------------------------------------ stage 5

EvaluateOutcome cmd_evaluate(const PipelineConfig& cfg, const EvaluateRequest& req) {
  cfg.validate();
  const RunLayout layout{cfg.paths.out_dir};
  std::string model_path = req.model;
  std::string label = fs::path(req.model).stem().string();
  if (req.model == "student") model_path = layout.student_model();
  if (req.model == "teacher") model_path = layout.teacher_model();
  if (req.model == "student" || req.model == "teacher") label = req.model;
  require_path("model", model_path);
  const auto model = load_model(model_path);
  const TypeSet types = types_of(model.config);

  auto testsets = req.testsets;
  if (testsets.empty()) testsets = resolve_paths(cfg).target_test;
  if (testsets.empty()) throw Error(ErrorKind::Config, "paths.target_test: no test sets configured");

  EvaluateOutcome out;
  const std::string dir = layout.eval_dir() + "/" + domain_file(label);
  fs::create_directories(dir);
  json manifest = {{"model", model_path}, {"model_hash", file_hash(model_path)}, {"testsets", json::object()}};
  for (const auto& [name, path] : testsets) {
    require_path("test set " + name, path);
    const auto gold = read_conll_file(path, types);
    const auto report = evaluate_model(model, gold);
    out.reports[name] = report;
    ReportTable t = report_table(report);
    t.title = label + " on " + name;
    const std::string base = dir + "/" + domain_file(name);
    write_atomic(base + ".csv", emit_report(t, ReportFormat::Csv));
    write_atomic(base + ".md", emit_report(t, ReportFormat::Markdown));
    out.outputs.push_back(base + ".csv");
    out.outputs.push_back(base + ".md");
    manifest["testsets"][name] = {{"path", path}, {"dataset_hash", file_hash(path)}, {"f1", report.micro.f1}};
    log::info("evaluate: ", label, " on ", name, ": P ", report.micro.precision, " R ", report.micro.recall, " F1 ",
              report.micro.f1);
  }
  write_atomic(dir + "/manifest.json", manifest.dump(2) + "\n");
  out.outputs.push_back(dir + "/manifest.json");
  return out;
}

// ------------------------------------------------------------ experiments

ExperimentSpec parse_experiment_spec(const json& j, const std::string& run_dir) {
  ExperimentSpec spec;
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "ablation") {
      reject_unknown(j, {"kind", "seeds", "parallel", "testset", "label_noise", "mixed_ratio"}, "experiment");
      AblationSpec a;
      read(j, "testset", a.testset);
      read(j, "label_noise", a.label_noise);
      read(j, "mixed_ratio", a.mixed_ratio);
      spec.variant = a;
    } else if (kind == "domain-mix") {
      reject_unknown(j, {"kind", "seeds", "parallel", "domains", "testsets", "breakdown_testset"}, "experiment");
      DomainMixSpec m;
      read(j, "domains", m.domains);
      read(j, "testsets", m.testsets);
      read(j, "breakdown_testset", m.breakdown_testset);
      spec.variant = m;
    } else if (kind == "size-sweep") {
      reject_unknown(j, {"kind", "seeds", "parallel", "sizes", "testset", "domains"}, "experiment");
      SizeSweepSpec s;
      read(j, "sizes", s.sizes);
      read(j, "testset", s.testset);
      read(j, "domains", s.domains);
      spec.variant = s;
    } else {
      throw Error(ErrorKind::Config, "experiment kind must be ablation, domain-mix or size-sweep, got '" + kind + "'");
    }
    read(j, "seeds", spec.seeds);
    read(j, "parallel", spec.parallel);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, std::string("experiment spec: ") + e.what());
  }
  spec.run_dir = run_dir;
  return spec;
}

std::string experiment_kind(const ExperimentSpec& spec) {
  if (std::holds_alternative<AblationSpec>(spec.variant)) return "ablation";
  if (std::holds_alternative<DomainMixSpec>(spec.variant)) return "domain-mix";
  return "size-sweep";
}

TransferSetup load_transfer_setup(const PipelineConfig& cfg) {
  const auto paths = resolve_paths(cfg);
  const RunLayout layout{cfg.paths.out_dir};
  require_path("teacher model (run train-teacher first)", layout.teacher_model());
  TransferSetup setup;
  setup.teacher = load_model(layout.teacher_model());
  setup.arch = setup.teacher.config;
  setup.types = types_of(setup.arch);
  setup.teacher_train = cfg.teacher;
  setup.student_train = cfg.student;
  require_path("paths.source_train", paths.source_train);
  setup.source_train = read_conll_file(paths.source_train, setup.types);
  setup.pseudo = load_pseudo(cfg, setup.types);
  for (const auto& [name, path] : paths.target_test) {
    require_path("paths.target_test." + name, path);
    setup.testsets[name] = read_conll_file(path, setup.types);
  }
  return setup;
}

namespace {

// Fills unset test set / domain fields from what the run has available.
void complete_spec(ExperimentSpec& spec, const TransferSetup& setup) {
  const std::string first_test = setup.testsets.empty() ? std::string() : setup.testsets.begin()->first;
  if (auto* a = std::get_if<AblationSpec>(&spec.variant)) {
    if (a->testset.empty()) a->testset = first_test;
  } else if (auto* m = std::get_if<DomainMixSpec>(&spec.variant)) {
    if (m->domains.empty()) {
      for (const auto& [d, s] : setup.pseudo) m->domains.push_back(d);
    }
    if (m->testsets.empty()) {
      for (const auto& [t, s] : setup.testsets) m->testsets.push_back(t);
    }
  } else if (auto* s = std::get_if<SizeSweepSpec>(&spec.variant)) {
    if (s->testset.empty()) s->testset = first_test;
  }
}

json spec_json(const ExperimentSpec& spec) {
  json j = {{"kind", experiment_kind(spec)}, {"seeds", spec.seeds}};
  if (const auto* a = std::get_if<AblationSpec>(&spec.variant)) {
    j.update({{"testset", a->testset}, {"label_noise", a->label_noise}, {"mixed_ratio", a->mixed_ratio}});
  } else if (const auto* m = std::get_if<DomainMixSpec>(&spec.variant)) {
    j.update({{"domains", m->domains}, {"testsets", m->testsets}, {"breakdown_testset", m->breakdown_testset}});
  } else if (const auto* s = std::get_if<SizeSweepSpec>(&spec.variant)) {
    j.update({{"sizes", s->sizes}, {"testset", s->testset}, {"domains", s->domains}});
  }
  return j;
}

std::string slug(const std::string& title) {
  std::string out;
  for (char c : title) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!out.empty() && out.back() != '_') {
      out += '_';
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

}  // namespace

ExperimentOutcome cmd_experiment(const PipelineConfig& cfg, const json& spec_in) {
  cfg.validate();
  const RunLayout layout{cfg.paths.out_dir};
  const std::string kind = spec_in.value("kind", std::string());
  const std::string run_dir = layout.experiment_dir(kind.empty() ? "unknown" : kind);
  ExperimentSpec spec = parse_experiment_spec(spec_in, run_dir);
  const TransferSetup setup = load_transfer_setup(cfg);
  complete_spec(spec, setup);
  spec.validate();

  fs::create_directories(run_dir);
  json datasets = {{"source_train", git_blob_hash(write_conll(setup.source_train))}};
  for (const auto& [d, s] : setup.pseudo) datasets["pseudo/" + d] = git_blob_hash(write_conll(s));
  for (const auto& [t, s] : setup.testsets) datasets["test/" + t] = git_blob_hash(write_conll(s));
  json config = {{"teacher", cfg.teacher}, {"student", cfg.student}, {"arch", setup.arch}, {"experiment", spec_json(spec)}};
  json manifest = {{"kind", kind},
                   {"config", config},
                   {"config_hash", json_hash(config)},
                   {"seeds", spec.seeds},
                   {"teacher_hash", file_hash(layout.teacher_model())},
                   {"dataset_hashes", datasets}};
  write_atomic(run_dir + "/manifest.json", manifest.dump(2) + "\n");

  log::info("experiment: ", kind, " with ", spec.seeds.size(), " seed(s)");
  ExperimentOutcome out;
  if (kind == "ablation") {
    out.tables = report_tables(run_ablation(setup, spec));
  } else if (kind == "domain-mix") {
    out.tables = report_tables(run_domain_mix(setup, spec));
  } else {
    out.tables = report_tables(run_size_sweep(setup, spec));
  }
  out.outputs.push_back(run_dir + "/manifest.json");
  for (const auto& t : out.tables) {
    const std::string base = run_dir + "/" + slug(t.title);
    write_atomic(base + ".csv", emit_report(t, ReportFormat::Csv));
    out.outputs.push_back(base + ".csv");
  }
  write_atomic(run_dir + "/report.md", emit_report(out.tables, ReportFormat::Markdown));
  out.outputs.push_back(run_dir + "/report.md");
  return out;
}

}  // namespace xnf
