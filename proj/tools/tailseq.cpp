// Command-line pipeline: prepare -> pretrain -> train -> evaluate -> report,
// plus a synthetic dataset generator. Exit codes: 0 success, 1 usage/config
// error, 2 data error, 3 numeric/training error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "tailseq/pipeline.hpp"

namespace {

using namespace tailseq;

std::string default_workdir() {
  const char* env = std::getenv("TAILSEQ_WORKDIR");
  return env != nullptr ? env : "workdir";
}

RunConfig load_config_or_default(const std::string& config_path, const fs::path& workdir) {
  fs::path path = config_path;
  if (path.empty()) {
    const fs::path wd_config = workdir / "config.json";
    if (!fs::exists(wd_config)) return RunConfig{};
    path = wd_config;
  }
  return parse_run_config(detail::read_json_file(path));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tailseq: long-tail aware sequential recommendation pipeline"};
  app.require_subcommand(1);

  std::string workdir = default_workdir();
  std::string config_path;
  std::string data_path;
  std::string out_path;
  std::string checkpoint_path;
  std::string target = "test";
  double alpha = 0.2;
  bool include_reversed = true;
  int min_count = 5;
  bool single_pass_filter = false;
  int max_len = 50;
  bool force = false;
  std::uint64_t seed_flag = 0;
  int users_flag = 0, items_flag = 0;

  auto add_workdir = [&](CLI::App* cmd) {
    cmd->add_option("--workdir", workdir, "working directory (env TAILSEQ_WORKDIR)");
  };

  CLI::App* prepare = app.add_subcommand("prepare", "filter, split, partition and index an interaction file");
  prepare->add_option("--data", data_path, "tab-separated user/item/timestamp file")->required();
  add_workdir(prepare);
  prepare->add_option("--alpha", alpha, "head fraction in (0, 1]");
  prepare->add_flag("--include-reversed,!--no-include-reversed", include_reversed,
                    "also index reversed suffixes (default on)");
  prepare->add_option("--min-count", min_count, "core filter threshold (default 5)");
  prepare->add_flag("--single-pass-filter", single_pass_filter, "do not iterate filtering to a fixed point");
  prepare->add_option("--max-len", max_len, "index truncation length (encoder max_len)");
  prepare->add_flag("--force", force, "overwrite an existing prepared workdir");

  CLI::App* synth = app.add_subcommand("synth", "generate a seeded long-tailed interaction file");
  synth->add_option("--config", config_path, "JSON config with a synth section");
  synth->add_option("--out", out_path, "output TSV path")->required();
  CLI::Option* synth_seed = synth->add_option("--seed", seed_flag, "override synth seed");
  CLI::Option* synth_users = synth->add_option("--users", users_flag, "override user count");
  CLI::Option* synth_items = synth->add_option("--items", items_flag, "override item count");
  synth->add_flag("--force", force, "overwrite an existing output file");

  CLI::App* pretrain_cmd = app.add_subcommand("pretrain", "train the backbone encoder");
  add_workdir(pretrain_cmd);
  pretrain_cmd->add_option("--config", config_path, "JSON run config (default workdir/config.json)");
  CLI::Option* pre_seed = pretrain_cmd->add_option("--seed", seed_flag, "override training seed");

  CLI::App* train_cmd = app.add_subcommand("train", "fine-tune with the bilateral branches");
  add_workdir(train_cmd);
  train_cmd->add_option("--config", config_path, "JSON run config (default workdir/config.json)");
  train_cmd->add_option("--from-checkpoint", checkpoint_path, "resume from a fine-tuning checkpoint");
  CLI::Option* train_seed = train_cmd->add_option("--seed", seed_flag, "override training seed");

  CLI::App* eval_cmd = app.add_subcommand("evaluate", "rank held-out items and write reports");
  add_workdir(eval_cmd);
  eval_cmd->add_option("--config", config_path, "JSON run config (default workdir/config.json)");
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint to evaluate (default melt.ckpt)");
  eval_cmd->add_option("--target", target, "validation or test")->check(CLI::IsMember({"validation", "test"}));
  CLI::Option* eval_seed = eval_cmd->add_option("--seed", seed_flag, "override evaluation seed");

  CLI::App* report_cmd = app.add_subcommand("report", "summarize reports, averaging across seeds");
  add_workdir(report_cmd);
  report_cmd->add_option("--target", target, "validation or test")->check(CLI::IsMember({"validation", "test"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (prepare->parsed()) {
      PrepareOptions opts;
      opts.data = data_path;
      opts.workdir = workdir;
      opts.alpha = alpha;
      opts.include_reversed = include_reversed;
      opts.min_count = min_count;
      opts.iterate_filter = !single_pass_filter;
      opts.max_len = max_len;
      opts.force = force;
      run_prepare(opts);
    } else if (synth->parsed()) {
      SynthOptions opts;
      if (!config_path.empty()) opts.config = parse_run_config(detail::read_json_file(config_path)).synth;
      if (synth_seed->count() > 0) opts.config.seed = seed_flag;
      if (synth_users->count() > 0) opts.config.n_users = users_flag;
      if (synth_items->count() > 0) opts.config.n_items = items_flag;
      opts.out_path = out_path;
      opts.force = force;
      run_synth(opts);
    } else if (pretrain_cmd->parsed()) {
      RunConfig cfg = load_config_or_default(config_path, workdir);
      if (pre_seed->count() > 0) cfg.train.seed = seed_flag;
      run_pretrain(workdir, cfg);
    } else if (train_cmd->parsed()) {
      RunConfig cfg = load_config_or_default(config_path, workdir);
      if (train_seed->count() > 0) cfg.train.seed = seed_flag;
      std::optional<fs::path> resume;
      if (!checkpoint_path.empty()) resume = fs::path(checkpoint_path);
      run_train(workdir, cfg, resume);
    } else if (eval_cmd->parsed()) {
      RunConfig cfg = load_config_or_default(config_path, workdir);
      EvaluateOptions opts;
      opts.checkpoint = checkpoint_path;
      opts.eval = cfg.eval;
      opts.eval.target = target == "validation" ? EvalConfig::Target::validation : EvalConfig::Target::test;
      if (eval_seed->count() > 0) opts.eval.seed = seed_flag;
      opts.beta = cfg.train.beta;
      opts.gamma = cfg.train.gamma;
      opts.ctx_cap = cfg.train.ctx_cache_cap;
      run_evaluate(workdir, opts);
    } else if (report_cmd->parsed()) {
      run_report(workdir, target);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
