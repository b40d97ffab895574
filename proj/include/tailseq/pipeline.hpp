#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tailseq/audit.hpp"
#include "tailseq/config.hpp"
#include "tailseq/io.hpp"
#include "tailseq/synthetic.hpp"
#include "tailseq/trainer.hpp"

namespace tailseq {

// Subcommand implementations. The CLI binary is a thin argument parser over
// these, which keeps the whole pipeline drivable in-process from tests.

/// One command at a time per workdir.
class WorkdirLock {
 public:
  explicit WorkdirLock(const fs::path& workdir, bool force = false) : path_(workdir / ".lock") {
    fs::create_directories(workdir);
    if (force) {
      std::error_code ec;
      fs::remove(path_, ec);
    }
    int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0)
      throw ConfigError("workdir " + workdir.string() +
                        " is locked by another command (remove .lock or pass --force if stale)");
    ::close(fd);
  }
  ~WorkdirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  WorkdirLock(const WorkdirLock&) = delete;
  WorkdirLock& operator=(const WorkdirLock&) = delete;

 private:
  fs::path path_;
};

namespace detail {

inline void write_workdir_config(const fs::path& workdir, const RunConfig& cfg) {
  write_json_file(workdir / "config.json", run_config_to_json(cfg));
}

/// The prepared artifacts pin alpha, reversed-subsequence handling and the
/// index truncation length; a config disagreeing with them would silently
/// evaluate a different setup.
inline void check_config_matches_prepared(const RunConfig& cfg, const PreparedData& data) {
  if (data.partition.alpha != cfg.train.alpha)
    throw ConfigError("config: train.alpha = " + std::to_string(cfg.train.alpha) +
                      " does not match prepared partition alpha = " + std::to_string(data.partition.alpha));
  if (data.index.include_reversed != cfg.train.include_reversed)
    throw ConfigError("config: train.include_reversed does not match the prepared index");
  if (data.index.max_len != cfg.encoder.max_len)
    throw ConfigError("config: encoder.max_len does not match the prepared index");
}

inline ordered_json epoch_log_json(const EpochLog& log) {
  return ordered_json{{"epoch", log.epoch},
                      {"rec", log.losses.rec},
                      {"user_branch", log.losses.user_branch},
                      {"item_branch", log.losses.item_branch},
                      {"total", log.losses.total},
                      {"val_hr10", log.val_hr},
                      {"val_ndcg10", log.val_ndcg},
                      {"seconds", log.seconds}};
}

inline void print_group_row(std::ostream& out, const char* name, const GroupStat& g) {
  out << "  " << std::left << std::setw(10) << name;
  if (g.present())
    out << std::right << std::setw(10) << fmt6(g.hr) << std::setw(10) << fmt6(g.ndcg) << std::setw(8) << g.n;
  else
    out << std::right << std::setw(10) << "-" << std::setw(10) << "-" << std::setw(8) << 0;
  out << '\n';
}

inline void print_report(std::ostream& out, const MetricsReport& r) {
  out << "  group        hr@" << r.k << "   ndcg@" << r.k << "       n\n";
  print_group_row(out, "overall", r.overall);
  print_group_row(out, "head_user", r.head_user);
  print_group_row(out, "tail_user", r.tail_user);
  print_group_row(out, "head_item", r.head_item);
  print_group_row(out, "tail_item", r.tail_item);
  out << "  " << std::left << std::setw(10) << "mean";
  if (r.mean_present)
    out << std::right << std::setw(10) << fmt6(r.mean_hr) << std::setw(10) << fmt6(r.mean_ndcg);
  else
    out << std::right << std::setw(10) << "-" << std::setw(10) << "-";
  out << "\n  cells:";
  for (auto [name, g] : {std::pair<const char*, const GroupStat*>{"HH", &r.hh},
                         {"HT", &r.ht},
                         {"TH", &r.th},
                         {"TT", &r.tt}}) {
    out << ' ' << name << '=';
    if (g->present())
      out << fmt6(g->hr);
    else
      out << '-';
  }
  out << '\n';
}

}  // namespace detail

// ---------------------------------------------------------------------------
// prepare

struct PrepareOptions {
  fs::path data;
  fs::path workdir;
  double alpha = 0.2;
  bool include_reversed = true;
  int min_count = 5;
  bool iterate_filter = true;
  int max_len = 50;
  bool force = false;
};

inline void run_prepare(const PrepareOptions& opts, std::ostream& out = std::cout) {
  if (!(opts.alpha > 0.0) || opts.alpha > 1.0) throw ConfigError("prepare: alpha must be in (0, 1]");
  if (opts.min_count < 1) throw ConfigError("prepare: min_count must be >= 1");
  WorkdirLock lock(opts.workdir, opts.force);
  const fs::path data_dir = opts.workdir / "data";
  if (fs::exists(data_dir / "train.json") && !opts.force)
    throw ConfigError("prepare: workdir already prepared, pass --force to overwrite");

  std::ifstream in(opts.data);
  if (!in) throw DataError("prepare: cannot open data file " + opts.data.string());
  InteractionLog raw = parse_interactions(in);
  InteractionLog log = core_filter(raw, opts.min_count, opts.iterate_filter);
  if (log.n_users() == 0) throw DataError("prepare: no users survive core filtering");

  std::vector<UserSequence> sequences = build_sequences(log);
  SplitDataset split = leave_one_out_split(sequences, log.n_items());
  SubsequenceIndex index = build_subsequence_index(split, opts.include_reversed, opts.max_len);
  HeadTailPartition partition = partition_head_tail(split, opts.alpha, &index);

  PreparedData prepared{log.users, log.items, std::move(split), std::move(index), std::move(partition)};
  save_prepared(prepared, data_dir);

  const double avg_len = static_cast<double>(log.interactions.size()) / log.n_users();
  ordered_json stats{{"users", log.n_users()},
                     {"items", log.n_items()},
                     {"interactions", log.interactions.size()},
                     {"avg_seq_len", avg_len},
                     {"raw_interactions", raw.interactions.size()},
                     {"min_count", opts.min_count},
                     {"iterate_filter", opts.iterate_filter},
                     {"alpha", opts.alpha},
                     {"include_reversed", opts.include_reversed},
                     {"max_len", opts.max_len}};
  detail::write_json_file(data_dir / "stats.json", stats);

  RunConfig cfg;
  cfg.data_in = opts.data.string();
  cfg.train.alpha = opts.alpha;
  cfg.train.include_reversed = opts.include_reversed;
  cfg.encoder.max_len = opts.max_len;
  detail::write_workdir_config(opts.workdir, cfg);

  out << "users:        " << log.n_users() << '\n'
      << "items:        " << log.n_items() << '\n'
      << "interactions: " << log.interactions.size() << '\n'
      << "avg_seq_len:  " << detail::fmt6(avg_len) << '\n';
}

// ---------------------------------------------------------------------------
// synth

struct SynthOptions {
  SyntheticConfig config;
  fs::path out_path;
  bool force = false;
};

inline void run_synth(const SynthOptions& opts, std::ostream& out = std::cout) {
  opts.config.validate();
  if (fs::exists(opts.out_path) && !opts.force)
    throw ConfigError("synth: output file exists, pass --force to overwrite");
  InteractionLog log = generate_synthetic(opts.config);
  if (opts.out_path.has_parent_path()) fs::create_directories(opts.out_path.parent_path());
  write_interactions_tsv(log, opts.out_path);
  out << "wrote " << log.interactions.size() << " interactions for " << log.n_users() << " users over "
      << log.n_items() << " items to " << opts.out_path.string() << '\n';
}

// ---------------------------------------------------------------------------
// pretrain / train

inline TrainResult run_pretrain(const fs::path& workdir, const RunConfig& cfg, std::ostream& out = std::cout) {
  WorkdirLock lock(workdir);
  PreparedData data = load_prepared(workdir / "data");
  detail::check_config_matches_prepared(cfg, data);
  fs::create_directories(workdir / "checkpoints");
  fs::create_directories(workdir / "logs");

  std::ofstream log_file(workdir / "logs" / "pretrain.jsonl", std::ios::trunc);
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochLog& log) { log_file << detail::epoch_log_json(log).dump() << '\n'; };
  hooks.on_checkpoint = [&](const Checkpoint& ckpt) {
    save_checkpoint(ckpt, workdir / "checkpoints" / "pretrain_last.ckpt");
  };

  TrainResult result = pretrain(data.split, data.partition, data.index, cfg.encoder, cfg.train, &hooks);
  save_checkpoint(result.last, workdir / "checkpoints" / "pretrain.ckpt");
  detail::write_workdir_config(workdir, cfg);
  out << "pretrain done: best epoch " << result.best_epoch << " with validation hr@" << cfg.train.val_k << " = "
      << detail::fmt6(result.best_val_hr) << '\n';
  return result;
}

// until_epoch < 0 runs the full stage; a cap simulates an interrupted run
// that left melt_last.ckpt behind for --from-checkpoint.
inline TrainResult run_train(const fs::path& workdir, const RunConfig& cfg,
                             const std::optional<fs::path>& from_checkpoint = std::nullopt,
                             std::ostream& out = std::cout, int until_epoch = -1) {
  WorkdirLock lock(workdir);
  PreparedData data = load_prepared(workdir / "data");
  detail::check_config_matches_prepared(cfg, data);
  fs::create_directories(workdir / "checkpoints");
  fs::create_directories(workdir / "logs");

  Checkpoint start;
  bool resuming = false;
  if (from_checkpoint.has_value()) {
    start = load_checkpoint(*from_checkpoint);
    if (start.stage != TrainStage::melt)
      throw ConfigError("train: --from-checkpoint expects a fine-tuning checkpoint, got a backbone one");
    resuming = true;
  } else {
    const fs::path pre_path = workdir / "checkpoints" / "pretrain.ckpt";
    if (!fs::exists(pre_path))
      throw DataError("train: no pretrain checkpoint at " + pre_path.string() + "; run the pretrain command first");
    Checkpoint pre = load_checkpoint(pre_path);
    if (pre.stage != TrainStage::backbone) throw ConfigError("train: pretrain.ckpt is not a backbone checkpoint");
    start.stage = TrainStage::melt;
    start.encoder = pre.encoder;
    start.seed = cfg.train.seed;
    start.params = pre.has_best ? pre.best_params : pre.params;
    start.adam = AdamState::init(start.params);
  }
  if (start.encoder.d != cfg.encoder.d || start.encoder.max_len != cfg.encoder.max_len ||
      start.encoder.n_blocks != cfg.encoder.n_blocks || start.encoder.n_heads != cfg.encoder.n_heads)
    throw ConfigError("train: checkpoint encoder shape does not match the config");
  if (start.params.n_items != data.split.n_items)
    throw ConfigError("train: checkpoint was built for a different item catalog");
  start.encoder.dropout_rate = cfg.encoder.dropout_rate;

  // The stage replays its streams from the checkpoint's seed; a different
  // configured seed would silently fork the run.
  TrainConfig tcfg = cfg.train;
  if (resuming) tcfg.seed = start.seed;

  std::ofstream log_file(workdir / "logs" / "train.jsonl", resuming ? std::ios::app : std::ios::trunc);
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochLog& log) { log_file << detail::epoch_log_json(log).dump() << '\n'; };
  hooks.on_checkpoint = [&](const Checkpoint& ckpt) {
    save_checkpoint(ckpt, workdir / "checkpoints" / "melt_last.ckpt");
  };

  TrainResult result = run_training_stage(std::move(start), data.split, data.partition, data.index, tcfg,
                                          tcfg.e_max, &hooks, until_epoch);
  const bool completed = static_cast<int>(result.last.next_epoch) >= tcfg.e_max;
  if (completed) save_checkpoint(result.last, workdir / "checkpoints" / "melt.ckpt");
  detail::write_workdir_config(workdir, cfg);
  out << (completed ? "train done" : "train stopped early") << ": best epoch " << result.best_epoch
      << " with validation hr@" << tcfg.val_k << " = " << detail::fmt6(result.best_val_hr) << '\n';
  return result;
}

// ---------------------------------------------------------------------------
// evaluate / report

struct EvaluateOptions {
  fs::path checkpoint;  // empty -> workdir/checkpoints/melt.ckpt
  EvalConfig eval;
  double beta = 1.0;
  double gamma = 0.0;
  int ctx_cap = 64;
};

inline MetricsReport run_evaluate(const fs::path& workdir, const EvaluateOptions& opts,
                                  std::ostream& out = std::cout) {
  WorkdirLock lock(workdir);
  PreparedData data = load_prepared(workdir / "data");
  const fs::path ckpt_path =
      opts.checkpoint.empty() ? workdir / "checkpoints" / "melt.ckpt" : opts.checkpoint;
  if (!fs::exists(ckpt_path)) throw DataError("evaluate: missing checkpoint " + ckpt_path.string());
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  if (ckpt.params.n_items != data.split.n_items)
    throw ConfigError("evaluate: checkpoint was built for a different item catalog");
  const ModelParams& params = ckpt.has_best ? ckpt.best_params : ckpt.params;

  InferenceOptions iopt{ckpt.stage == TrainStage::melt, opts.beta, opts.gamma, opts.ctx_cap};
  MetricsReport report = evaluate(params, ckpt.encoder, data.split, data.partition, data.index, opts.eval, iopt);

  const std::string target = opts.eval.target == EvalConfig::Target::validation ? "validation" : "test";
  const std::string stem = "eval_" + target + "_seed" + std::to_string(opts.eval.seed);
  const fs::path reports = workdir / "reports";
  fs::create_directories(reports);
  detail::write_json_file(reports / (stem + ".json"),
                          report_to_json(report, data, target, opts.eval.seed, opts.eval.n_negatives,
                                         ckpt_path.filename().string()),
                          -1);
  write_summary_csv(report, reports / (stem + "_summary.csv"));
  write_cells_csv(report, reports / (stem + "_cells.csv"));

  out << "evaluated " << report.records.size() << " users on " << target << " (seed " << opts.eval.seed << ")\n";
  if (report.tail_without_context > 0)
    out << "note: " << report.tail_without_context << " tail items had no training subsequences; scored unenhanced\n";
  detail::print_report(out, report);
  return report;
}

inline void run_report(const fs::path& workdir, const std::string& target, std::ostream& out = std::cout) {
  const fs::path reports = workdir / "reports";
  if (!fs::exists(reports)) throw DataError("report: no reports directory in " + workdir.string());

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(reports)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("eval_" + target + "_seed", 0) == 0 && name.size() > 5 && name.substr(name.size() - 5) == ".json")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("report: no evaluation reports for target '" + target + "'");

  const std::vector<std::string> groups = {"overall", "head_user", "tail_user", "head_item", "tail_item", "mean"};
  std::map<std::string, std::pair<double, int>> hr_acc, ndcg_acc;
  out << "runs (" << target << "):\n";
  for (const auto& file : files) {
    ordered_json j = detail::read_json_file(file);
    out << "  " << file.filename().string() << ":";
    for (const auto& g : groups) {
      const auto& node = j.at("aggregates").at(g);
      if (node.is_null()) continue;
      const double hr = node.at("hr").get<double>();
      const double ndcg = node.at("ndcg").get<double>();
      hr_acc[g].first += hr;
      hr_acc[g].second += 1;
      ndcg_acc[g].first += ndcg;
      ndcg_acc[g].second += 1;
      if (g == "overall") out << " hr=" << detail::fmt6(hr) << " ndcg=" << detail::fmt6(ndcg);
    }
    out << '\n';
  }

  out << "mean over " << files.size() << " run(s):\n";
  std::ofstream csv(reports / ("eval_" + target + "_mean_summary.csv"), std::ios::trunc);
  csv << "group,hr,ndcg,runs\n";
  for (const auto& g : groups) {
    out << "  " << std::left << std::setw(10) << g;
    auto hit = hr_acc.find(g);
    if (hit == hr_acc.end() || hit->second.second == 0) {
      out << " -\n";
      csv << g << ",,,0\n";
      continue;
    }
    const double hr = hit->second.first / hit->second.second;
    const double ndcg = ndcg_acc[g].first / ndcg_acc[g].second;
    out << std::right << std::setw(10) << detail::fmt6(hr) << std::setw(10) << detail::fmt6(ndcg) << " ("
        << hit->second.second << " runs)\n";
    csv << g << ',' << detail::fmt6(hr) << ',' << detail::fmt6(ndcg) << ',' << hit->second.second << '\n';
  }
}

}  // namespace tailseq
