// xnf: cross-lingual NER transfer pipeline driver.
#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "xnf/error.hpp"
#include "xnf/log.hpp"
#include "xnf/pipeline.hpp"
#include "xnf/text.hpp"

namespace {

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool force = false;
};

// Precedence: flags > config file > defaults.
xnf::PipelineConfig load(const GlobalFlags& g) {
  auto cfg = xnf::load_pipeline_config(g.config.empty() ? std::nullopt : std::optional<std::string>(g.config));
  if (g.seed) cfg.seed = *g.seed;
  if (!g.out.empty()) cfg.paths.out_dir = g.out;
  cfg.apply_seed();
  return cfg;
}

void report_outputs(const std::vector<std::string>& outputs) {
  for (const auto& o : outputs) std::cout << o << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  xnf::log::init_from_env();
  CLI::App app{"Cross-lingual NER via annotation projection"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags g;
  app.add_option("--config", g.config, "Pipeline config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Run seed");
  app.add_option("--out", g.out, "Run directory");
  app.add_flag("--force", g.force, "Ignore cached stage results");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic parallel corpus");
  std::optional<std::size_t> synth_pairs;
  synth->add_option("--pairs", synth_pairs, "Pairs per domain");

  app.add_subcommand("train-teacher", "Train the source-language tagger");

  auto* project = app.add_subcommand("project", "Tag, align and filter parallel data into pseudo labels");
  std::optional<bool> suppress_misc;
  std::optional<std::string> aligner;
  std::optional<std::string> endpoint;
  std::optional<std::size_t> sample_n;
  std::optional<double> empty_ratio;
  project->add_flag("--suppress-misc,!--keep-misc", suppress_misc, "Rewrite MISC to O before projection");
  project->add_option("--aligner", aligner, "lexical or remote")->check(CLI::IsMember({"lexical", "remote"}));
  project->add_option("--endpoint", endpoint, "Remote aligner URL");
  project->add_option("--sample", sample_n, "Equal-weight sample size over domains");
  project->add_option("--empty-ratio", empty_ratio, "Max share of all-O sentences");

  auto* finetune = app.add_subcommand("finetune", "Fine-tune the student on pseudo labels");
  std::optional<std::string> loss;
  std::optional<double> gamma;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<bool> freeze;
  finetune->add_option("--loss", loss, "ce, focal or rw")->check(CLI::IsMember({"ce", "focal", "rw"}));
  finetune->add_option("--gamma", gamma, "Loss gamma");
  finetune->add_option("--epochs", epochs, "Training epochs");
  finetune->add_option("--lr", lr, "Learning rate");
  finetune->add_flag("--freeze-embeddings,!--train-embeddings", freeze, "Keep embeddings fixed");

  auto* evaluate = app.add_subcommand("evaluate", "Score a model on target test sets");
  xnf::EvaluateRequest eval_req;
  std::vector<std::string> testsets;
  evaluate->add_option("--model", eval_req.model, "student, teacher or a model path");
  evaluate->add_option("--testset", testsets, "NAME=PATH (repeatable)");

  auto* experiment = app.add_subcommand("experiment", "Run an ablation, domain-mix or size-sweep harness");
  std::string spec_path;
  std::string kind;
  std::vector<std::uint64_t> seeds;
  std::optional<double> label_noise;
  experiment->add_option("--spec", spec_path, "Experiment spec (JSON)")->check(CLI::ExistingFile);
  experiment->add_option("--kind", kind, "ablation, domain-mix or size-sweep")
      ->check(CLI::IsMember({"ablation", "domain-mix", "size-sweep"}));
  experiment->add_option("--seeds", seeds, "Seeds (overrides the spec)")->delimiter(',');
  experiment->add_option("--label-noise", label_noise, "Ablation: pseudo-label noise rate");

  CLI11_PARSE(app, argc, argv);

  try {
    auto cfg = load(g);
    if (suppress_misc) cfg.suppress_misc = *suppress_misc;
    if (aligner) cfg.aligner = *aligner;
    if (endpoint) cfg.endpoint = *endpoint;
    if (sample_n) cfg.sample_n = *sample_n;
    if (empty_ratio) cfg.empty_ratio = *empty_ratio;
    if (loss) cfg.student.loss = xnf::LossKind::parse(*loss, gamma.value_or(cfg.student.loss.gamma));
    else if (gamma) cfg.student.loss = xnf::LossKind::parse(cfg.student.loss.name(), *gamma);
    if (epochs) cfg.student.epochs = *epochs;
    if (lr) cfg.student.learning_rate = *lr;
    if (freeze) cfg.student.freeze_embeddings = *freeze;
    if (synth_pairs) {
      for (auto& d : cfg.synth.domains) d.pairs = *synth_pairs;
    }
    cfg.validate();

    const xnf::RunOptions opts{g.force};
    xnf::RunLock lock(cfg.paths.out_dir);
    if (*synth) {
      report_outputs(xnf::cmd_synth(cfg, opts).outputs);
    } else if (app.got_subcommand("train-teacher")) {
      report_outputs(xnf::cmd_train_teacher(cfg, opts).outputs);
    } else if (*project) {
      report_outputs(xnf::cmd_project(cfg, opts).outputs);
    } else if (*finetune) {
      report_outputs(xnf::cmd_finetune(cfg, opts).outputs);
    } else if (*evaluate) {
      for (const auto& t : testsets) {
        const auto eq = t.find('=');
        if (eq == std::string::npos || eq == 0) {
          throw xnf::Error(xnf::ErrorKind::Config, "--testset expects NAME=PATH, got '" + t + "'");
        }
        eval_req.testsets[t.substr(0, eq)] = t.substr(eq + 1);
      }
      const auto out = xnf::cmd_evaluate(cfg, eval_req);
      for (const auto& [name, r] : out.reports) {
        std::cout << name << "\tP=" << r.micro.precision << "\tR=" << r.micro.recall << "\tF1=" << r.micro.f1 << '\n';
      }
      report_outputs(out.outputs);
    } else if (*experiment) {
      nlohmann::json spec = nlohmann::json::object();
      if (!spec_path.empty()) {
        try {
          spec = nlohmann::json::parse(xnf::text::read_file(spec_path));
        } catch (const nlohmann::json::parse_error& e) {
          throw xnf::Error(xnf::ErrorKind::Config, spec_path + ": " + e.what());
        }
      }
      if (!kind.empty()) spec["kind"] = kind;
      if (!spec.contains("kind")) throw xnf::Error(xnf::ErrorKind::Config, "experiment needs --kind or a spec with \"kind\"");
      if (!seeds.empty()) spec["seeds"] = seeds;
      if (label_noise) spec["label_noise"] = *label_noise;
      const auto out = xnf::cmd_experiment(cfg, spec);
      std::cout << xnf::emit_report(out.tables, xnf::ReportFormat::Markdown);
      report_outputs(out.outputs);
    }
  } catch (const std::exception& e) {
    xnf::log::error(e.what());
    return 1;
  }
  return 0;
}
