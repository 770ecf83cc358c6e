#include <algorithm>
#include <cctype>
#include <cmath>
#include <exception>
#include <functional>
#include <numeric>

#include <json.hpp>

#include "xnf/config_json.hpp"
#include "xnf/corpus_io.hpp"
#include "xnf/error.hpp"
#include "xnf/evalkit.hpp"
#include "xnf/hash.hpp"
#include "xnf/rng.hpp"
#include "xnf/spans.hpp"
#include "xnf/text.hpp"

namespace xnf {

using nlohmann::json;

void ExperimentSpec::validate() const {
  if (seeds.empty()) throw Error(ErrorKind::InvalidSpec, "experiment needs at least one seed");
  if (const auto* sweep = std::get_if<SizeSweepSpec>(&variant)) {
    if (sweep->sizes.empty()) throw Error(ErrorKind::InvalidSpec, "size sweep needs sizes");
    for (std::size_t i = 1; i < sweep->sizes.size(); ++i) {
      if (sweep->sizes[i] <= sweep->sizes[i - 1]) throw Error(ErrorKind::InvalidSpec, "sizes must be strictly increasing");
    }
  }
  if (const auto* mix = std::get_if<DomainMixSpec>(&variant)) {
    if (mix->domains.empty() || mix->testsets.empty()) {
      throw Error(ErrorKind::InvalidSpec, "domain mix needs domains and test sets");
    }
  }
}

namespace {

// One independent (row, seed) training run.
struct Cell {
  std::string row;
  std::uint64_t seed = 0;
  std::function<std::map<std::string, EvalReport>()> run;
  json manifest;
  std::string dataset_hash;
  std::map<std::string, EvalReport> reports;
};

const std::vector<LabeledSentence>& lookup(const std::map<std::string, std::vector<LabeledSentence>>& m,
                                           const std::string& key, const char* what) {
  auto it = m.find(key);
  if (it == m.end()) throw Error(ErrorKind::InvalidSpec, std::string("unknown ") + what + " '" + key + "'");
  return it->second;
}

json metrics_json(const Metrics& m) {
  return json{{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
              {"true_positives", m.true_positives}, {"predicted", m.predicted}, {"gold", m.gold}};
}

std::string cell_file_name(const std::string& row, std::uint64_t seed) {
  std::string safe;
  for (char c : row) safe.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return safe + "__seed" + std::to_string(seed) + ".json";
}

// Runs every cell (in parallel when asked), then writes per-cell artifacts.
// Cells own their data, so the schedule cannot affect results.
void run_cells(std::vector<Cell>& cells, const ExperimentSpec& spec) {
  std::vector<std::exception_ptr> errors(cells.size());
  const auto n = static_cast<std::ptrdiff_t>(cells.size());
  if (spec.parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      try {
        cells[static_cast<std::size_t>(i)].reports = cells[static_cast<std::size_t>(i)].run();
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      try {
        cells[static_cast<std::size_t>(i)].reports = cells[static_cast<std::size_t>(i)].run();
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      throw Error(e.kind(), "row '" + cells[i].row + "' seed " + std::to_string(cells[i].seed) + ": " + e.detail());
    }
  }
  if (!spec.run_dir) return;
  for (const auto& c : cells) {
    json doc = c.manifest;
    doc["row"] = c.row;
    doc["seed"] = c.seed;
    doc["config_hash"] = git_blob_hash(c.manifest.dump());
    doc["dataset_hash"] = c.dataset_hash;
    json metrics = json::object();
    for (const auto& [name, r] : c.reports) metrics[name] = metrics_json(r.micro);
    doc["metrics"] = metrics;
    text::write_file(*spec.run_dir + "/cells/" + cell_file_name(c.row, c.seed), doc.dump(2) + "\n");
  }
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

TrainConfig with_seed(TrainConfig cfg, std::uint64_t seed) {
  cfg.seed = seed;
  return cfg;
}

json train_manifest(const TrainConfig& cfg, const std::string& init, const std::string& data) {
  json j = cfg;
  j.erase("seed");
  j["init"] = init;
  j["data"] = data;
  return j;
}

}  // namespace

// ------------------------------------------------------------ domain mix

DomainMixResult run_domain_mix(const TransferSetup& setup, const ExperimentSpec& spec) {
  spec.validate();
  const auto& mix = std::get<DomainMixSpec>(spec.variant);
  DomainMixResult result;
  result.columns = mix.testsets;
  result.breakdown_testset = mix.breakdown_testset.empty() ? mix.testsets.front() : mix.breakdown_testset;
  result.types = setup.types.names();

  std::map<std::string, std::vector<LabeledSentence>> tests;
  for (const auto& t : mix.testsets) tests[t] = lookup(setup.testsets, t, "test set");
  if (!tests.count(result.breakdown_testset)) {
    tests[result.breakdown_testset] = lookup(setup.testsets, result.breakdown_testset, "test set");
  }

  std::vector<std::pair<std::string, std::vector<LabeledSentence>>> rows;
  std::vector<LabeledSentence> combined;
  for (const auto& d : mix.domains) {
    const auto& data = lookup(setup.pseudo, d, "domain");
    rows.emplace_back(d, data);
    combined.insert(combined.end(), data.begin(), data.end());
  }
  rows.emplace_back("combined", combined);

  auto eval_all = [&tests](const TaggerModel& m) {
    std::map<std::string, EvalReport> out;
    for (const auto& [name, gold] : tests) out[name] = evaluate_model(m, gold);
    return out;
  };

  std::vector<Cell> cells;
  for (const auto& [row, data] : rows) {
    const std::string data_hash = git_blob_hash(write_conll(data));
    for (auto seed : spec.seeds) {
      Cell c;
      c.row = row;
      c.seed = seed;
      const TrainConfig cfg = with_seed(setup.student_train, seed);
      c.manifest = train_manifest(cfg, "teacher", row);
      c.dataset_hash = data_hash;
      c.run = [&setup, &data, cfg, &eval_all] { return eval_all(finetune_student(setup.teacher, data, cfg)); };
      cells.push_back(std::move(c));
    }
  }
  run_cells(cells, spec);
  const auto zero = eval_all(setup.teacher);

  auto add_row = [&](const std::string& label, const std::vector<std::map<std::string, EvalReport>>& per_seed) {
    result.rows.push_back(label);
    std::vector<double> f1s;
    for (const auto& t : mix.testsets) {
      std::vector<double> v;
      for (const auto& r : per_seed) v.push_back(r.at(t).micro.f1);
      f1s.push_back(mean(v));
    }
    result.f1.push_back(f1s);
    std::vector<double> by_type;
    for (const auto& type : result.types) {
      std::vector<double> v;
      for (const auto& r : per_seed) {
        const auto& pt = r.at(result.breakdown_testset).per_type;
        auto it = pt.find(type);
        v.push_back(it == pt.end() ? 0.0 : it->second.f1);
      }
      by_type.push_back(mean(v));
    }
    result.type_f1.push_back(by_type);
  };

  add_row("zero-transfer", {zero});
  for (const auto& [row, data] : rows) {
    std::vector<std::map<std::string, EvalReport>> per_seed;
    for (const auto& c : cells) {
      if (c.row == row) per_seed.push_back(c.reports);
    }
    add_row(row, per_seed);
  }

  for (const auto& [row, data] : rows) {
    result.count_rows.push_back(row);
    std::vector<std::size_t> counts(result.types.size() + 1, 0);
    for (const auto& s : data) {
      for (const auto& span : decode_spans(s.tags)) {
        auto it = std::find(result.types.begin(), result.types.end(), span.type);
        if (it != result.types.end()) ++counts[static_cast<std::size_t>(it - result.types.begin())];
        ++counts.back();
      }
    }
    result.counts.push_back(counts);
  }
  return result;
}

// ------------------------------------------------------------ size sweep

SizeSweepResult run_size_sweep(const TransferSetup& setup, const ExperimentSpec& spec) {
  spec.validate();
  const auto& sweep = std::get<SizeSweepSpec>(spec.variant);
  const auto& test = lookup(setup.testsets, sweep.testset, "test set");

  std::vector<LabeledSentence> pool;
  if (sweep.domains.empty()) {
    for (const auto& [d, data] : setup.pseudo) pool.insert(pool.end(), data.begin(), data.end());
  } else {
    for (const auto& d : sweep.domains) {
      const auto& data = lookup(setup.pseudo, d, "domain");
      pool.insert(pool.end(), data.begin(), data.end());
    }
  }
  if (sweep.sizes.back() > pool.size()) {
    throw Error(ErrorKind::SizeExceedsData, "size " + std::to_string(sweep.sizes.back()) + " exceeds " +
                                                std::to_string(pool.size()) + " pseudo-labeled sentences");
  }

  std::map<std::uint64_t, std::vector<LabeledSentence>> shuffled;
  for (auto seed : spec.seeds) {
    auto copy = pool;
    Rng rng(Rng::mix(seed, 0x517e));
    rng.shuffle(std::span(copy));
    shuffled[seed] = std::move(copy);
  }

  std::vector<Cell> cells;
  for (auto size : sweep.sizes) {
    for (auto seed : spec.seeds) {
      Cell c;
      c.row = "size_" + std::to_string(size);
      c.seed = seed;
      const TrainConfig cfg = with_seed(setup.student_train, seed);
      c.manifest = train_manifest(cfg, "teacher", "pseudo prefix " + std::to_string(size));
      const auto& data = shuffled.at(seed);
      c.dataset_hash = git_blob_hash(write_conll({data.begin(), data.begin() + static_cast<std::ptrdiff_t>(size)}));
      c.run = [&setup, &data, &test, &sweep, size, cfg] {
        std::vector<LabeledSentence> prefix(data.begin(), data.begin() + static_cast<std::ptrdiff_t>(size));
        return std::map<std::string, EvalReport>{
            {sweep.testset, evaluate_model(finetune_student(setup.teacher, prefix, cfg), test)}};
      };
      cells.push_back(std::move(c));
    }
  }
  run_cells(cells, spec);

  SizeSweepResult result;
  std::size_t k = 0;
  for (auto size : sweep.sizes) {
    SizePoint p;
    p.size = size;
    for (std::size_t s = 0; s < spec.seeds.size(); ++s, ++k) p.per_seed.push_back(cells[k].reports.at(sweep.testset).micro.f1);
    p.mean_f1 = mean(p.per_seed);
    p.stddev = sample_stddev(p.per_seed);
    result.points.push_back(std::move(p));
  }
  double best = 0.0;
  for (const auto& p : result.points) best = std::max(best, p.mean_f1);
  for (const auto& p : result.points) {
    if (p.mean_f1 >= best - 0.01) {
      result.plateau_size = p.size;
      break;
    }
  }
  return result;
}

// ------------------------------------------------------------ ablation

std::vector<SettingManifest> ablation_settings(const TransferSetup& setup) {
  const TrainConfig& st = setup.student_train;
  const LossKind ce = LossKind::cross_entropy();
  std::string student_loss = st.loss.name();
  std::string upper = student_loss;
  for (auto& ch : upper) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  const std::size_t scratch_epochs = setup.teacher_train.epochs + st.epochs;

  auto make = [&](int id, std::string name, std::string init, std::string data, const LossKind* loss,
                  std::size_t epochs) {
    SettingManifest m;
    m.setting = id;
    m.name = std::move(name);
    m.init = std::move(init);
    m.data = std::move(data);
    if (loss) {
      m.loss = loss->name();
      m.gamma = loss->gamma;
      m.epochs = epochs;
      m.learning_rate = st.learning_rate;
      m.batch_size = st.batch_size;
      m.freeze_embeddings = init == "teacher" && st.freeze_embeddings;
    } else {
      m.loss = "none";
    }
    return m;
  };
  return {
      make(1, "Sequential fine-tune with " + upper, "teacher", "pseudo", &st.loss, st.epochs),
      make(2, "Zero-transfer", "none", "none", nullptr, 0),
      make(3, "Sequential fine-tune with CE", "teacher", "pseudo", &ce, st.epochs),
      make(4, "Skip fine-tune on source", "scratch", "pseudo", &st.loss, scratch_epochs),
      make(5, "Fine-tune on mixed source/target (CE)", "scratch", "source+pseudo", &ce, scratch_epochs),
      make(6, "Fine-tune on mixed source/target (" + upper + ")", "scratch", "source+pseudo", &st.loss,
           scratch_epochs),
  };
}

AblationResult run_ablation(const TransferSetup& setup, const ExperimentSpec& spec) {
  spec.validate();
  const auto& abl = std::get<AblationSpec>(spec.variant);
  const auto& test = lookup(setup.testsets, abl.testset, "test set");
  if (!(abl.mixed_ratio >= 0.0)) throw Error(ErrorKind::InvalidSpec, "mixed_ratio must be >= 0");

  std::vector<LabeledSentence> pseudo;
  for (const auto& [d, data] : setup.pseudo) pseudo.insert(pseudo.end(), data.begin(), data.end());
  if (pseudo.empty()) throw Error(ErrorKind::EmptyCorpus, "no pseudo-labeled data for the ablation");

  // Per-seed training data shared by the settings of that seed.
  struct SeedData {
    std::vector<LabeledSentence> pseudo;
    std::vector<LabeledSentence> mixed;
  };
  std::map<std::uint64_t, SeedData> per_seed;
  for (auto seed : spec.seeds) {
    SeedData d;
    d.pseudo = abl.label_noise > 0.0
                   ? inject_label_noise(pseudo, setup.arch.labels, abl.label_noise, Rng::mix(seed, 0x9015e))
                   : pseudo;
    auto source = setup.source_train;
    Rng rng(Rng::mix(seed, 0x31c5));
    rng.shuffle(std::span(source));
    const auto want = static_cast<std::size_t>(std::llround(abl.mixed_ratio * static_cast<double>(d.pseudo.size())));
    source.resize(std::min(source.size(), want));
    d.mixed = source;
    d.mixed.insert(d.mixed.end(), d.pseudo.begin(), d.pseudo.end());
    per_seed[seed] = std::move(d);
  }

  const auto settings = ablation_settings(setup);
  std::vector<Cell> cells;
  for (const auto& m : settings) {
    for (auto seed : spec.seeds) {
      Cell c;
      c.row = "setting_" + std::to_string(m.setting);
      c.seed = seed;
      json manifest = {{"setting", m.setting}, {"name", m.name},   {"init", m.init},
                       {"data", m.data},       {"loss", m.loss},   {"gamma", m.gamma},
                       {"epochs", m.epochs},   {"learning_rate", m.learning_rate},
                       {"batch_size", m.batch_size}, {"freeze_embeddings", m.freeze_embeddings},
                       {"label_noise", abl.label_noise}, {"mixed_ratio", abl.mixed_ratio}};
      c.manifest = manifest;
      const SeedData& data = per_seed.at(seed);
      const std::vector<LabeledSentence>* train_set =
          m.data == "pseudo" ? &data.pseudo : (m.data == "source+pseudo" ? &data.mixed : nullptr);
      c.dataset_hash = train_set ? git_blob_hash(write_conll(*train_set)) : "";
      TrainConfig cfg = with_seed(setup.student_train, seed);
      if (m.loss != "none") {
        cfg.loss = LossKind::parse(m.loss, m.gamma);
        cfg.epochs = m.epochs;
        cfg.freeze_embeddings = m.freeze_embeddings;
      }
      const std::string init = m.init;
      c.run = [&setup, &test, &abl, train_set, cfg, init]() -> std::map<std::string, EvalReport> {
        if (init == "none") return {{abl.testset, evaluate_model(setup.teacher, test)}};
        if (init == "teacher") return {{abl.testset, evaluate_model(finetune_student(setup.teacher, *train_set, cfg), test)}};
        return {{abl.testset, evaluate_model(train_from_scratch(setup.arch, *train_set, cfg), test)}};
      };
      cells.push_back(std::move(c));
    }
  }
  run_cells(cells, spec);

  AblationResult result;
  std::size_t k = 0;
  for (const auto& m : settings) {
    AblationRow row;
    row.manifest = m;
    std::vector<double> p, r;
    for (std::size_t s = 0; s < spec.seeds.size(); ++s, ++k) {
      const auto& micro = cells[k].reports.at(abl.testset).micro;
      p.push_back(micro.precision);
      r.push_back(micro.recall);
      row.per_seed_f1.push_back(micro.f1);
    }
    row.precision = mean(p);
    row.recall = mean(r);
    row.f1 = mean(row.per_seed_f1);
    result.rows.push_back(std::move(row));
  }
  return result;
}

}  // namespace xnf
