#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sys/wait.h>

#include "fake_server.hpp"
#include "helpers.hpp"
#include "xnf/error.hpp"
#include "xnf/hash.hpp"
#include "xnf/pipeline.hpp"
#include "xnf/text.hpp"

using namespace xnf;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

PipelineConfig small_config(const std::string& out) {
  PipelineConfig cfg;
  cfg.paths.out_dir = out;
  cfg.synth.source_train = 600;
  cfg.synth.source_test = 100;
  cfg.synth.target_test = 100;
  cfg.synth.domains = {{"news", 200, {}}, {"chat", 150, {{"PER", 1}, {"ORG", 0}, {"LOC", 1}, {"MISC", 0}}}};
  cfg.apply_seed();
  return cfg;
}

ErrorKind error_kind(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

std::string read(const std::string& path) { return text::read_file(path); }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(XNF_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config JSON") {
  PipelineConfig cfg = small_config("/tmp/x");
  cfg.aligner = "remote";
  cfg.endpoint = "http://127.0.0.1:9/align";
  cfg.suppress_misc = true;
  cfg.sample_n = 77;
  cfg.student.loss = LossKind::focal(1.5);
  cfg.paths.parallel["news"] = {"a.src", "a.tgt"};
  const json j = cfg;
  const PipelineConfig back = j.get<PipelineConfig>();
  CHECK(json(back) == j);
  CHECK(back.sample_n == 77u);
  CHECK(back.student.loss == LossKind::focal(1.5));

  json bad = j;
  bad["projection"]["empty_ratoi"] = 0.2;
  try {
    bad.get<PipelineConfig>();
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
    CHECK(std::string(e.what()).find("empty_ratoi") != std::string::npos);
  }
  json bad_type = j;
  bad_type["seed"] = "one";
  CHECK(error_kind([&] { bad_type.get<PipelineConfig>(); }) == ErrorKind::Config);

  PipelineConfig invalid;
  invalid.empty_ratio = 1.0;
  CHECK_THROWS_AS(invalid.validate(), Error);

  const std::string dir = testutil::temp_dir("cfgfile");
  text::write_file(dir + "/c.json", R"({"seed": 9, "projection": {"suppress_misc": true}})");
  const auto loaded = load_pipeline_config(dir + "/c.json");
  CHECK(loaded.seed == 9);
  CHECK(loaded.suppress_misc);
  CHECK(loaded.empty_ratio == 0.3);
  text::write_file(dir + "/broken.json", "{");
  CHECK(error_kind([&] { load_pipeline_config(dir + "/broken.json"); }) == ErrorKind::Config);
}

TEST_CASE("missing inputs name the config field") {
  PipelineConfig cfg = small_config(testutil::temp_dir("missing"));
  cfg.paths.source_train = "/nonexistent/train.conll";
  try {
    cmd_train_teacher(cfg);
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
    CHECK(std::string(e.what()).find("paths.source_train") != std::string::npos);
  }
}

TEST_CASE("run lock") {
  const std::string dir = testutil::temp_dir("lock");
  {
    RunLock a(dir);
    CHECK(error_kind([&] { RunLock b(dir); }) == ErrorKind::Io);
  }
  RunLock again(dir);
  CHECK(fs::exists(dir + "/.lock"));
}

TEST_CASE("stage artifacts") {
  const std::string dir = testutil::temp_dir("stage");
  CHECK_FALSE(read_stage(dir + "/none.json").has_value());
  StageArtifact a{2, "abc", "2026-01-01T00:00:00Z", {{"x", "1"}}};
  write_stage(dir + "/s.json", a);
  const auto b = read_stage(dir + "/s.json");
  REQUIRE(b.has_value());
  CHECK(b->stage == 2);
  CHECK(b->content_hash == "abc");
  CHECK(b->input_hashes == a.input_hashes);
  const auto j = json::parse(read(dir + "/s.json"));
  for (const char* k : {"stage", "content_hash", "timestamp", "input_hashes"}) CHECK(j.contains(k));
}

TEST_CASE("small pipeline end to end") {
  const std::string out = testutil::temp_dir("pipe");
  const PipelineConfig cfg = small_config(out);
  const RunLayout layout{out};

  cmd_synth(cfg);
  const auto paths = resolve_paths(cfg);
  CHECK(paths.parallel.size() == 2);
  CHECK(fs::exists(paths.parallel.at("news").source));
  CHECK(fs::exists(paths.target_test.at("chat")));
  CHECK(fs::exists(paths.lexicon));

  const auto t1 = cmd_train_teacher(cfg);
  CHECK_FALSE(t1.skipped);
  CHECK(fs::exists(layout.teacher_model()));
  CHECK(fs::exists(layout.teacher_model() + ".vocab"));
  const auto log = json::parse(read(out + "/teacher/train_log.json"));
  CHECK(log.at("loss_history").size() == cfg.teacher.epochs);
  const auto model_bytes = read(layout.teacher_model());

  SUBCASE("stages skip when inputs are unchanged") {
    CHECK(cmd_train_teacher(cfg).skipped);
    CHECK(read(layout.teacher_model()) == model_bytes);
    CHECK_FALSE(cmd_train_teacher(cfg, RunOptions{true}).skipped);
    CHECK(read(layout.teacher_model()) == model_bytes);  // deterministic retrain
    PipelineConfig changed = cfg;
    changed.teacher.epochs = cfg.teacher.epochs + 2;
    CHECK_FALSE(cmd_train_teacher(changed).skipped);
    CHECK(read(layout.teacher_model()) != model_bytes);
  }
  SUBCASE("project, finetune, evaluate, experiment") {
    const auto p = cmd_project(cfg);
    CHECK_FALSE(p.skipped);
    for (const char* f : {"news.conll", "chat.conll", "stats.json", "counts.csv", "counts.md", "stage.json"}) {
      CHECK(fs::exists(layout.pseudo_dir() + "/" + f));
    }
    const auto stats = json::parse(read(layout.pseudo_dir() + "/stats.json"));
    const std::size_t processed = stats.at("processed");
    CHECK(processed == 350);
    CHECK(stats.at("kept").get<std::size_t>() + stats.at("discarded_total").get<std::size_t>() == processed);
    CHECK(stats.at("discarded").size() == 3);
    const auto counts = read(layout.pseudo_dir() + "/counts.csv");
    CHECK(counts.rfind("domain,PER,ORG,LOC,MISC,All\n", 0) == 0);
    CHECK(cmd_project(cfg).skipped);

    cmd_finetune(cfg);
    CHECK(fs::exists(layout.student_model()));
    CHECK(cmd_finetune(cfg).skipped);

    const auto ev = cmd_evaluate(cfg, EvaluateRequest{});
    CHECK(ev.reports.size() == 2);
    MESSAGE("student F1 news " << ev.reports.at("news").micro.f1 << ", chat " << ev.reports.at("chat").micro.f1);
    CHECK(ev.reports.at("news").micro.f1 > 0.5);
    CHECK(fs::exists(layout.eval_dir() + "/student/news.csv"));
    CHECK(fs::exists(layout.eval_dir() + "/student/manifest.json"));

    const auto ex = cmd_experiment(cfg, json{{"kind", "domain-mix"}, {"seeds", {1}}});
    REQUIRE(ex.tables.size() == 3);
    CHECK(ex.tables[0].row_labels == std::vector<std::string>{"zero-transfer", "chat", "news", "combined"});
    const auto manifest = json::parse(read(layout.experiment_dir("domain-mix") + "/manifest.json"));
    for (const char* k : {"kind", "config", "config_hash", "seeds", "teacher_hash", "dataset_hashes"}) {
      CHECK(manifest.contains(k));
    }
    CHECK(manifest.at("teacher_hash") == git_blob_hash(model_bytes));
    CHECK(fs::exists(layout.experiment_dir("domain-mix") + "/report.md"));
    CHECK(fs::exists(layout.experiment_dir("domain-mix") + "/cells"));
    CHECK(error_kind([&] { cmd_experiment(cfg, json{{"kind", "nonsense"}}); }) == ErrorKind::Config);
  }
  SUBCASE("MISC suppression flag") {
    PipelineConfig on = cfg;
    on.suppress_misc = true;
    cmd_project(on);
    const auto news = parse_conll(read(layout.pseudo_dir() + "/news.conll"), TypeSet::conll());
    for (const auto& s : news) {
      for (const auto& t : s.tags) CHECK(t.find("MISC") == std::string::npos);
    }
    cmd_project(cfg);
    const auto with = read(layout.pseudo_dir() + "/news.conll");
    CHECK(with.find("MISC") != std::string::npos);
  }
  SUBCASE("remote aligner failure leaves a resumable cursor") {
    const Lexicon lexicon = Lexicon::from_tsv(read(paths.lexicon));
    std::atomic<int> calls{0};
    std::atomic<bool> fail_once{true};
    testutil::FakeAligner server([&](const json& req) {
      if (++calls == 60 && fail_once.exchange(false)) return std::make_pair(503, std::string("{}"));
      const AlignmentQuery q{req.at("entity").get<std::string>(), req.at("tokens").get<std::vector<std::string>>()};
      const auto r = align_lexical(q, lexicon, AlignerConfig{});
      return std::make_pair(200, json{{"mask", spans_to_mask(r.spans, q.target_tokens.size())}}.dump());
    });
    PipelineConfig remote = cfg;
    remote.aligner = "remote";
    remote.endpoint = server.url();
    try {
      cmd_project(remote);
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Transport);
      CHECK(std::string(e.what()).find("resume") != std::string::npos);
    }
    CHECK(fs::exists(layout.cursor_file()));
    const int before = calls.load();
    cmd_project(remote);
    CHECK_FALSE(fs::exists(layout.cursor_file()));
    const auto resumed = read(layout.pseudo_dir() + "/news.conll") + read(layout.pseudo_dir() + "/chat.conll");
    // Resuming does not redo the pairs finished before the failure.
    const int resumed_calls = calls.load() - before;
    fail_once = false;
    calls = 0;
    cmd_project(remote, RunOptions{true});
    CHECK(resumed_calls < calls.load());
    CHECK(read(layout.pseudo_dir() + "/news.conll") + read(layout.pseudo_dir() + "/chat.conll") == resumed);
  }
}

TEST_CASE("CLI exit codes") {
  const std::string out = testutil::temp_dir("cli");
  CHECK(run_cli("") != 0);
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("bogus") != 0);
  CHECK(run_cli("--out " + out + " evaluate") == 1);
  CHECK(run_cli("--config /nonexistent.json synth") != 0);
  text::write_file(out + "/cfg.json", R"({"synth": {"source_train": 300, "source_test": 20, "target_test": 20,
    "domains": [{"name": "d", "pairs": 60}]}, "teacher": {"epochs": 3}, "student": {"epochs": 1}})");
  CHECK(run_cli("--config " + out + "/cfg.json --out " + out + "/run synth") == 0);
  CHECK(run_cli("--config " + out + "/cfg.json --out " + out + "/run train-teacher") == 0);
  CHECK(run_cli("--config " + out + "/cfg.json --out " + out + "/run project --sample 40") == 0);
  CHECK(run_cli("--config " + out + "/cfg.json --out " + out + "/run finetune --loss rw --gamma 4") == 0);
  CHECK(run_cli("--config " + out + "/cfg.json --out " + out + "/run evaluate") == 0);
  CHECK(run_cli("--config " + out + "/cfg.json --out " + out + "/run finetune --loss hinge") != 0);
  CHECK_FALSE(fs::exists(out + "/run/.lock"));
  const auto stats = json::parse(read(out + "/run/pseudo/stats.json"));
  CHECK(stats.at("processed") == 40);
}
