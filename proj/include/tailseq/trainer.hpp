#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "tailseq/checkpoint.hpp"
#include "tailseq/curriculum.hpp"
#include "tailseq/evaluate.hpp"
#include "tailseq/losses.hpp"

namespace tailseq {

struct TrainConfig {
  double alpha = 0.2;
  double beta = 1.0;
  double gamma = 0.0;
  double lambda_u = 0.1;
  double lambda_i = 0.1;
  int e_max = 30;          // fine-tuning epochs (curriculum denominator)
  int batch_size = 128;
  double learning_rate = 1e-3;
  int pretrain_epochs = 20;
  std::uint64_t seed = 7;
  bool include_reversed = true;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  bool enhance_item_branch_inputs = true;  // apply the user generator inside rhat_i
  int ctx_cache_cap = 64;                  // max subsequences per cached tail item
  int val_negatives = 100;
  int val_k = 10;

  void validate() const {
    if (!(alpha > 0.0) || alpha > 1.0) throw ConfigError("train: alpha must be in (0, 1]");
    if (beta < 0.0 || beta > 1.0 || gamma < 0.0 || gamma > 1.0)
      throw ConfigError("train: beta and gamma must be in [0, 1]");
    if (lambda_u < 0.0 || lambda_i < 0.0) throw ConfigError("train: lambda_u and lambda_i must be >= 0");
    if (e_max < 1) throw ConfigError("train: e_max must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
    if (pretrain_epochs < 1) throw ConfigError("train: pretrain_epochs must be >= 1");
    if (ctx_cache_cap < 1) throw ConfigError("train: ctx_cache_cap must be >= 1");
    if (val_negatives < 1 || val_k < 1) throw ConfigError("train: validation protocol needs positive k and negatives");
  }
  AdamConfig adam() const { return AdamConfig{learning_rate, adam_beta1, adam_beta2, adam_eps}; }
};

struct EpochLog {
  int epoch = 0;
  LossBreakdown losses;  // per-batch means
  double val_hr = 0.0;
  double val_ndcg = 0.0;
  double seconds = 0.0;
};

struct TrainHooks {
  std::function<void(const EpochLog&)> on_epoch;
  std::function<void(const Checkpoint&)> on_checkpoint;  // called with the resumable state
  std::function<void(int epoch, int batch, const LossBreakdown&)> on_batch;
};

struct TrainResult {
  ModelParams params;  // best-validation parameters
  int best_epoch = -1;
  double best_val_hr = 0.0;
  std::vector<EpochLog> epochs;
  Checkpoint last;  // full state after the final epoch
};

/// Runs one training stage and returns the best-validation parameters. The
/// backbone stage trains with the recommendation loss only; the fine-tuning
/// stage adds the curriculum-weighted branch losses, refreshes the tail-item
/// context cache every epoch and embeds inputs through it. All randomness is
/// drawn from streams keyed on (seed, purpose, epoch, batch), so a resumed
/// run replays exactly. stage_epochs is the stage's full length (and the
/// curriculum denominator); until_epoch caps how far this invocation runs,
/// which is how an interrupted run stops early without changing any epoch's
/// weights.
inline TrainResult run_training_stage(Checkpoint state, const SplitDataset& split, const HeadTailPartition& part,
                                      const SubsequenceIndex& index, const TrainConfig& tcfg, int stage_epochs,
                                      const TrainHooks* hooks = nullptr, int until_epoch = -1) {
  tcfg.validate();
  const EncoderConfig& enc = state.encoder;
  enc.validate();
  const bool melt = state.stage == TrainStage::melt;
  if (melt && (part.kappa_u < 1 || part.kappa_i < 1))
    throw DataError("partition error: kappa_u and kappa_i must be positive for fine-tuning");

  const int n_users = split.n_users();
  const int n_batches = (n_users + tcfg.batch_size - 1) / tcfg.batch_size;
  const std::vector<int> head_items = part.head_items();
  const int item_slice =
      melt && !head_items.empty() ? (static_cast<int>(head_items.size()) + n_batches - 1) / n_batches : 0;
  const AdamConfig adam_cfg = tcfg.adam();
  const EvalConfig val_cfg{tcfg.val_k, tcfg.val_negatives, tcfg.seed, EvalConfig::Target::validation};
  const InferenceOptions val_opt{melt, tcfg.beta, tcfg.gamma, tcfg.ctx_cache_cap};

  TrainResult result;
  result.best_epoch = static_cast<int>(state.best_epoch);
  result.best_val_hr = state.has_best ? state.best_val_hr : -1.0;

  const int stop = until_epoch < 0 ? stage_epochs : std::min(stage_epochs, until_epoch);
  for (int e = static_cast<int>(state.next_epoch); e < stop; ++e) {
    const auto t0 = std::chrono::steady_clock::now();

    // Per-epoch contextualized representations of tail items, frozen for the
    // epoch's input enhancement and the branch targets.
    InferenceContext cache;
    if (melt)
      cache = build_inference_context(state.params, enc, split, part, index,
                                      InferenceOptions{true, tcfg.beta, tcfg.gamma, tcfg.ctx_cache_cap});
    EmbeddingEnhancer enhancer{&part, &cache.tail_ctx, tcfg.gamma};
    const EmbeddingEnhancer* enh = melt ? &enhancer : nullptr;

    std::vector<int> user_order(static_cast<std::size_t>(n_users));
    for (int u = 0; u < n_users; ++u) user_order[static_cast<std::size_t>(u)] = u;
    {
      Rng rng = derive_rng(tcfg.seed, Stream::user_shuffle, static_cast<std::uint64_t>(e));
      rng.shuffle(user_order);
    }
    std::vector<int> item_order = head_items;
    if (melt) {
      Rng rng = derive_rng(tcfg.seed, Stream::item_shuffle, static_cast<std::uint64_t>(e));
      rng.shuffle(item_order);
    }

    LossBreakdown epoch_sum;
    for (int b = 0; b < n_batches; ++b) {
      const int lo = b * tcfg.batch_size;
      const int hi = std::min(n_users, lo + tcfg.batch_size);

      BatchPlan plan;
      plan.beta = tcfg.beta;
      plan.enhance_item_inputs = tcfg.enhance_item_branch_inputs;

      Rng neg_rng = derive_rng(tcfg.seed, Stream::negatives, static_cast<std::uint64_t>(e),
                               static_cast<std::uint64_t>(b));
      for (int bi = lo; bi < hi; ++bi) {
        const int u = user_order[static_cast<std::size_t>(bi)];
        plan.rec.push_back(make_rec_entry(split.train[static_cast<std::size_t>(u)], enc, split.n_items, neg_rng));
      }

      if (melt && tcfg.lambda_u > 0.0) {
        Rng r_rng = derive_rng(tcfg.seed, Stream::user_r, static_cast<std::uint64_t>(e),
                               static_cast<std::uint64_t>(b));
        for (int bi = lo; bi < hi; ++bi) {
          const int u = user_order[static_cast<std::size_t>(bi)];
          if (!part.head_user(u)) continue;
          const auto& train_seq = split.train[static_cast<std::size_t>(u)];
          const int r = r_rng.range(1, part.kappa_u);
          UserEntry ue;
          ue.truncated = truncate_recent(train_seq, r);
          ue.weight = curriculum_weight(e, stage_epochs, static_cast<int>(train_seq.size()), part.l_min_user,
                                        part.l_max_user);
          ue.target = encode_sequence(state.params, enc, train_seq, enh);
          plan.users.push_back(std::move(ue));
        }
      }

      if (melt && tcfg.lambda_i > 0.0 && !head_items.empty()) {
        Rng k_rng = derive_rng(tcfg.seed, Stream::item_k, static_cast<std::uint64_t>(e),
                               static_cast<std::uint64_t>(b));
        Rng sub_rng = derive_rng(tcfg.seed, Stream::item_subseq, static_cast<std::uint64_t>(e),
                                 static_cast<std::uint64_t>(b));
        std::map<int, VectorXd> owner_memo;
        auto owner_rep = [&](int u) -> const VectorXd& {
          auto it = owner_memo.find(u);
          if (it == owner_memo.end())
            it = owner_memo.emplace(u, encode_sequence(state.params, enc, split.train[static_cast<std::size_t>(u)],
                                                       enh))
                     .first;
          return it->second;
        };
        for (int s = 0; s < item_slice; ++s) {
          const int item = item_order[static_cast<std::size_t>((static_cast<long>(b) * item_slice + s) %
                                                               static_cast<long>(item_order.size()))];
          const int k = k_rng.range(1, part.kappa_i);
          ItemEntry ie;
          ie.item = item;
          ie.weight = curriculum_weight(e, stage_epochs, index.size_of(item), part.l_min_item, part.l_max_item);
          ie.target = state.params.item_emb.row(item).transpose();
          for (const Subsequence& sub : sample_subsequences(index, item, k, sub_rng)) {
            ie.sub_reps.push_back(encode_sequence(state.params, enc, sub.items, enh));
            ie.owner_reps.push_back(owner_rep(sub.owner));
          }
          plan.items.push_back(std::move(ie));
        }
      }

      ModelParams grads = zeros_like(state.params);
      const DropoutKeys keys{tcfg.seed, static_cast<std::uint64_t>(e), static_cast<std::uint64_t>(b)};
      const double lu = melt ? tcfg.lambda_u : 0.0;
      const double li = melt ? tcfg.lambda_i : 0.0;
      LossBreakdown loss = eval_batch(state.params, enc, enh, plan, lu, li, true, keys, &grads);
      if (!std::isfinite(loss.total))
        throw NumericError("training error: non-finite loss at epoch " + std::to_string(e));
      optimizer_step(state.params, grads, state.adam, adam_cfg);
      if (hooks != nullptr && hooks->on_batch) hooks->on_batch(e, b, loss);

      epoch_sum.rec += loss.rec;
      epoch_sum.user_branch += loss.user_branch;
      epoch_sum.item_branch += loss.item_branch;
      epoch_sum.total += loss.total;
    }

    MetricsReport val = evaluate(state.params, enc, split, part, index, val_cfg, val_opt);

    EpochLog log;
    log.epoch = e;
    log.losses.rec = epoch_sum.rec / n_batches;
    log.losses.user_branch = epoch_sum.user_branch / n_batches;
    log.losses.item_branch = epoch_sum.item_branch / n_batches;
    log.losses.total = epoch_sum.total / n_batches;
    log.val_hr = val.overall.hr;
    log.val_ndcg = val.overall.ndcg;
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.epochs.push_back(log);

    if (log.val_hr > result.best_val_hr) {
      result.best_val_hr = log.val_hr;
      result.best_epoch = e;
      state.has_best = true;
      state.best_val_hr = log.val_hr;
      state.best_epoch = e;
      state.best_params = state.params;
    }
    state.next_epoch = static_cast<std::uint64_t>(e) + 1;
    if (hooks != nullptr && hooks->on_checkpoint) hooks->on_checkpoint(state);
    if (hooks != nullptr && hooks->on_epoch) hooks->on_epoch(log);
  }

  result.params = state.has_best ? state.best_params : state.params;
  result.last = std::move(state);
  return result;
}

/// Backbone pretraining: recommendation loss only, no enhancement, no branch
/// losses. Generators stay at their zero initialization.
inline TrainResult pretrain(const SplitDataset& split, const HeadTailPartition& part, const SubsequenceIndex& index,
                            const EncoderConfig& enc, const TrainConfig& tcfg, const TrainHooks* hooks = nullptr) {
  tcfg.validate();
  Checkpoint start;
  start.stage = TrainStage::backbone;
  start.encoder = enc;
  start.seed = tcfg.seed;
  start.params = init_params(enc, split.n_items, tcfg.seed);
  start.adam = AdamState::init(start.params);
  return run_training_stage(std::move(start), split, part, index, tcfg, tcfg.pretrain_epochs, hooks);
}

/// Fine-tuning on top of pretrained parameters: bilateral branch losses with
/// curriculum weights, mutual enhancement through the per-epoch cache, and
/// the recommendation loss, all trained jointly for e_max epochs.
inline TrainResult train_melt(const SplitDataset& split, const HeadTailPartition& part, const SubsequenceIndex& index,
                              const ModelParams& pretrained, const EncoderConfig& enc, const TrainConfig& tcfg,
                              const TrainHooks* hooks = nullptr) {
  tcfg.validate();
  Checkpoint start;
  start.stage = TrainStage::melt;
  start.encoder = enc;
  start.seed = tcfg.seed;
  start.params = pretrained;
  start.adam = AdamState::init(start.params);
  return run_training_stage(std::move(start), split, part, index, tcfg, tcfg.e_max, hooks);
}

}  // namespace tailseq
