#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tailseq/config.hpp"
#include "tailseq/pipeline.hpp"

using namespace tailseq;
namespace fsys = std::filesystem;

namespace {

const fsys::path kScratch = fsys::temp_directory_path() / "tailseq_cli_tests";

int run_cli(const std::string& args) {
  const std::string cmd = std::string(TAILSEQ_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fsys::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_tiny_config(const fsys::path& path, std::uint64_t seed) {
  nlohmann::ordered_json j = {
      {"schema_version", 1},
      {"encoder", {{"d", 8}, {"max_len", 12}, {"n_blocks", 1}, {"n_heads", 2}, {"dropout_rate", 0.1}}},
      {"train",
       {{"alpha", 0.2},
        {"lambda_u", 0.1},
        {"lambda_i", 0.1},
        {"e_max", 2},
        {"batch_size", 16},
        {"learning_rate", 0.01},
        {"pretrain_epochs", 2},
        {"seed", seed},
        {"val_negatives", 10},
        {"val_k", 10}}},
      {"eval", {{"k", 10}, {"n_negatives", 10}, {"seed", seed}, {"target", "test"}}},
      {"synth",
       {{"n_users", 60},
        {"n_items", 30},
        {"zipf_exponent", 1.1},
        {"user_activity_exponent", 2.0},
        {"min_seq_len", 5},
        {"mean_seq_len", 8.0},
        {"seed", 31}}}};
  std::ofstream out(path);
  out << j.dump(2);
}

}  // namespace

// ---------------------------------------------------------------------------
// config parsing

TEST_CASE("run config applies defaults and validates sections") {
  nlohmann::ordered_json j = {{"schema_version", 1}};
  RunConfig cfg = parse_run_config(j);
  CHECK(cfg.encoder.d == 50);
  CHECK(cfg.encoder.max_len == 50);
  CHECK(cfg.train.beta == 1.0);
  CHECK(cfg.train.gamma == 0.0);
  CHECK(cfg.eval.n_negatives == 100);
}

TEST_CASE("run config accepts the search grid for the loss weights") {
  for (double lu : {0.1, 0.2, 0.3, 0.4}) {
    for (double li : {0.1, 0.2, 0.3, 0.4}) {
      nlohmann::ordered_json j = {{"schema_version", 1}, {"train", {{"lambda_u", lu}, {"lambda_i", li}}}};
      CHECK_NOTHROW(parse_run_config(j));
    }
  }
}

TEST_CASE("run config rejects unknown keys and invalid values") {
  CHECK_THROWS_AS(parse_run_config({{"schema_version", 1}, {"mystery", 1}}), ConfigError);
  CHECK_THROWS_AS(parse_run_config({{"schema_version", 1}, {"train", {{"typo_key", 2}}}}), ConfigError);
  CHECK_THROWS_AS(parse_run_config({{"schema_version", 2}}), ConfigError);
  CHECK_THROWS_AS(parse_run_config(nlohmann::ordered_json::object()), ConfigError);
  CHECK_THROWS_AS(parse_run_config({{"schema_version", 1}, {"train", {{"lambda_u", -0.5}}}}), ConfigError);
  CHECK_THROWS_AS(parse_run_config({{"schema_version", 1}, {"train", {{"alpha", 0.0}}}}), ConfigError);
  CHECK_THROWS_AS(parse_run_config({{"schema_version", 1}, {"eval", {{"target", "future"}}}}), ConfigError);
  CHECK_THROWS_AS(parse_run_config({{"schema_version", 1}, {"encoder", {{"d", 7}, {"n_heads", 2}}}}), ConfigError);
}

TEST_CASE("run config round-trips through its JSON form") {
  RunConfig cfg;
  cfg.train.lambda_u = 0.3;
  cfg.train.seed = 99;
  cfg.encoder.d = 32;
  cfg.eval.target = EvalConfig::Target::validation;
  RunConfig back = parse_run_config(run_config_to_json(cfg));
  CHECK(back.train.lambda_u == 0.3);
  CHECK(back.train.seed == 99);
  CHECK(back.encoder.d == 32);
  CHECK(back.eval.target == EvalConfig::Target::validation);
}

// ---------------------------------------------------------------------------
// command behavior through the real binary

TEST_CASE("cli pipeline: synth, prepare, pretrain, train, evaluate, report") {
  fsys::remove_all(kScratch);
  fsys::create_directories(kScratch);
  const fsys::path config = kScratch / "config.json";
  const fsys::path data = kScratch / "data.tsv";
  const fsys::path workdir = kScratch / "wd";
  write_tiny_config(config, 7);

  SECTION("full run with deterministic artifacts") {
    // synth twice with the same seed produces identical bytes
    REQUIRE(run_cli("synth --config " + config.string() + " --out " + data.string()) == 0);
    const fsys::path data2 = kScratch / "data2.tsv";
    REQUIRE(run_cli("synth --config " + config.string() + " --out " + data2.string()) == 0);
    CHECK(slurp(data) == slurp(data2));

    REQUIRE(run_cli("prepare --data " + data.string() + " --workdir " + workdir.string() +
                    " --alpha 0.2 --max-len 12") == 0);
    CHECK(fsys::exists(workdir / "data" / "train.json"));
    CHECK(fsys::exists(workdir / "config.json"));

    // rerun without --force refuses
    CHECK(run_cli("prepare --data " + data.string() + " --workdir " + workdir.string() +
                  " --alpha 0.2 --max-len 12") == 1);

    // training before pretraining is a data error with an actionable message
    CHECK(run_cli("train --workdir " + workdir.string() + " --config " + config.string()) == 2);

    REQUIRE(run_cli("pretrain --workdir " + workdir.string() + " --config " + config.string()) == 0);
    CHECK(fsys::exists(workdir / "checkpoints" / "pretrain.ckpt"));
    REQUIRE(run_cli("train --workdir " + workdir.string() + " --config " + config.string()) == 0);
    CHECK(fsys::exists(workdir / "checkpoints" / "melt.ckpt"));
    CHECK(fsys::exists(workdir / "logs" / "train.jsonl"));

    REQUIRE(run_cli("evaluate --workdir " + workdir.string() + " --config " + config.string() +
                    " --target test --seed 5") == 0);
    const fsys::path report = workdir / "reports" / "eval_test_seed5.json";
    REQUIRE(fsys::exists(report));
    const std::string first = slurp(report);
    const std::string first_summary = slurp(workdir / "reports" / "eval_test_seed5_summary.csv");

    REQUIRE(run_cli("evaluate --workdir " + workdir.string() + " --config " + config.string() +
                    " --target test --seed 5") == 0);
    CHECK(slurp(report) == first);
    CHECK(slurp(workdir / "reports" / "eval_test_seed5_summary.csv") == first_summary);

    REQUIRE(run_cli("evaluate --workdir " + workdir.string() + " --config " + config.string() +
                    " --target test --seed 6") == 0);
    CHECK(run_cli("report --workdir " + workdir.string() + " --target test") == 0);
    CHECK(fsys::exists(workdir / "reports" / "eval_test_mean_summary.csv"));
  }
}

TEST_CASE("cli maps error classes to exit codes") {
  fsys::remove_all(kScratch / "err");
  fsys::create_directories(kScratch / "err");
  const fsys::path config = kScratch / "err" / "config.json";
  const fsys::path data = kScratch / "err" / "data.tsv";
  write_tiny_config(config, 3);
  REQUIRE(run_cli("synth --config " + config.string() + " --out " + data.string()) == 0);

  // usage errors
  CHECK(run_cli("prepare") == 1);
  CHECK(run_cli("no-such-command") == 1);

  // alpha = 0 is a config error
  const fsys::path wd = kScratch / "err" / "wd";
  CHECK(run_cli("prepare --data " + data.string() + " --workdir " + wd.string() + " --alpha 0.0") == 1);

  // unreadable data file is a data error
  CHECK(run_cli("prepare --data " + (kScratch / "err" / "missing.tsv").string() + " --workdir " + wd.string()) == 2);

  // λ outside [0, ∞) rejected at parse time
  nlohmann::ordered_json bad = detail::read_json_file(config);
  bad["train"]["lambda_u"] = -1.0;
  const fsys::path bad_config = kScratch / "err" / "bad.json";
  std::ofstream(bad_config) << bad.dump(2);
  REQUIRE(run_cli("prepare --data " + data.string() + " --workdir " + wd.string() + " --max-len 12") == 0);
  CHECK(run_cli("pretrain --workdir " + wd.string() + " --config " + bad_config.string()) == 1);

  // missing checkpoint for evaluate is a data error
  CHECK(run_cli("evaluate --workdir " + wd.string() + " --config " + config.string() + " --target test") == 2);

  // infeasible synth config
  nlohmann::ordered_json infeasible = detail::read_json_file(config);
  infeasible["synth"]["n_items"] = 4;
  const fsys::path inf_config = kScratch / "err" / "inf.json";
  std::ofstream(inf_config) << infeasible.dump(2);
  CHECK(run_cli("synth --config " + inf_config.string() + " --out " + (kScratch / "err" / "x.tsv").string()) == 1);
}

TEST_CASE("cli resumes fine-tuning from a checkpoint") {
  const fsys::path root = kScratch / "resume";
  fsys::remove_all(root);
  fsys::create_directories(root);
  const fsys::path config = root / "config.json";
  const fsys::path data = root / "data.tsv";
  write_tiny_config(config, 21);
  REQUIRE(run_cli("synth --config " + config.string() + " --out " + data.string()) == 0);

  auto set_up = [&](const fsys::path& wd) {
    REQUIRE(run_cli("prepare --data " + data.string() + " --workdir " + wd.string() + " --alpha 0.2 --max-len 12") ==
            0);
    REQUIRE(run_cli("pretrain --workdir " + wd.string() + " --config " + config.string()) == 0);
  };
  const fsys::path wd_full = root / "full";
  const fsys::path wd_resume = root / "resumed";
  set_up(wd_full);
  set_up(wd_resume);

  RunConfig cfg = parse_run_config(detail::read_json_file(config));
  std::ostringstream sink;
  // uninterrupted run
  run_train(wd_full, cfg, std::nullopt, sink);
  // interrupted after epoch 0, resumed from melt_last.ckpt
  run_train(wd_resume, cfg, std::nullopt, sink, 1);
  REQUIRE(run_cli("train --workdir " + wd_resume.string() + " --config " + config.string() + " --from-checkpoint " +
                  (wd_resume / "checkpoints" / "melt_last.ckpt").string()) == 0);

  CHECK(slurp(wd_full / "checkpoints" / "melt.ckpt") == slurp(wd_resume / "checkpoints" / "melt.ckpt"));
}

TEST_CASE("workdir lock refuses concurrent commands") {
  const fsys::path wd = kScratch / "locked";
  fsys::remove_all(wd);
  fsys::create_directories(wd);
  std::ofstream(wd / ".lock") << "held";
  CHECK_THROWS_AS(WorkdirLock(wd), ConfigError);
  CHECK_NOTHROW(WorkdirLock(wd, true));  // --force clears a stale lock
}
