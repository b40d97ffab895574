#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "tailseq/encoder.hpp"
#include "tailseq/subseq.hpp"

namespace tailseq {

struct LossBreakdown {
  double rec = 0.0;
  double user_branch = 0.0;  // sum of w_u * L_u over head users in the batch
  double item_branch = 0.0;  // sum of w_i * L_i over head items in the batch
  double total = 0.0;
};

inline LossBreakdown total_loss(double rec, double user_branch, double item_branch, double lambda_u,
                                double lambda_i) {
  if (lambda_u < 0.0 || lambda_i < 0.0) throw ConfigError("loss weights lambda_u/lambda_i must be >= 0");
  LossBreakdown b;
  b.rec = rec;
  b.user_branch = user_branch;
  b.item_branch = item_branch;
  b.total = lambda_u * user_branch + lambda_i * item_branch + rec;
  return b;
}

namespace detail {
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
// log(1 + e^x), overflow-safe
inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
}  // namespace detail

// ---------------------------------------------------------------------------
// contextualized item representations

/// Mean encoder output over a set of subsequences ending at `item`. With
/// enhance_subsequences, each subsequence representation r is replaced by
/// G_U(r) + beta * p_owner before averaging. Inner encoder passes are
/// forward-only (they are constants for gradient purposes).
inline VectorXd contextualized_item_rep(const ModelParams& p, const EncoderConfig& cfg, const SubsequenceIndex& index,
                                        int item, const std::vector<Subsequence>* subset, bool enhance_subsequences,
                                        double beta, const std::map<int, VectorXd>* full_user_reps,
                                        const EmbeddingEnhancer* input_enhancer = nullptr) {
  const std::vector<Subsequence>& subs = subset != nullptr ? *subset : index.at(item);
  if (subs.empty()) throw DataError("representation error: item " + std::to_string(item) + " has empty C_i");
  VectorXd acc = VectorXd::Zero(cfg.d);
  for (const auto& sub : subs) {
    VectorXd r = encode_sequence(p, cfg, sub.items, input_enhancer);
    if (enhance_subsequences) {
      if (full_user_reps == nullptr) throw DataError("contextualized_item_rep: enhancement needs full_user_reps");
      r = enhance_tail_user_rep(p, r, full_user_reps->at(sub.owner), beta);
    }
    acc += r;
  }
  return acc / static_cast<double>(subs.size());
}

// ---------------------------------------------------------------------------
// standalone loss forwards (the per-term contracts; training uses eval_batch)

/// Next-item binary cross-entropy with one sampled negative per position:
/// mean over positions of -log s(h_t . q_pos) - log(1 - s(h_t . q_neg)).
inline double rec_loss(const ModelParams& p, const EncoderConfig& cfg, const std::vector<int>& train_seq,
                       const std::vector<int>& negatives, const EmbeddingEnhancer* enhancer = nullptr,
                       bool train_mode = false, Rng* dropout_rng = nullptr) {
  if (train_seq.size() < 2) throw DataError("loss error: sequence has no next-item pair");
  std::vector<int> inputs(train_seq.begin(), train_seq.end() - 1);
  std::vector<int> positives(train_seq.begin() + 1, train_seq.end());
  if (inputs.size() > static_cast<std::size_t>(cfg.max_len)) {
    inputs.erase(inputs.begin(), inputs.end() - cfg.max_len);
    positives.erase(positives.begin(), positives.end() - cfg.max_len);
  }
  if (negatives.size() != positives.size()) throw DataError("rec_loss: negatives must align with positions");
  MatrixXd y = encode_all(p, cfg, inputs, enhancer, train_mode, dropout_rng);
  double loss = 0.0;
  for (Eigen::Index pos = 0; pos < y.rows(); ++pos) {
    const int it_pos = positives[static_cast<std::size_t>(pos)];
    const int it_neg = negatives[static_cast<std::size_t>(pos)];
    if (it_neg == it_pos || it_neg < 0 || it_neg >= p.n_items)
      throw DataError("rec_loss: invalid negative at position " + std::to_string(pos));
    const double s_pos = y.row(pos).dot(p.item_emb.row(it_pos));
    const double s_neg = y.row(pos).dot(p.item_emb.row(it_neg));
    loss += detail::softplus(-s_pos) + detail::softplus(s_neg);
  }
  return loss / static_cast<double>(y.rows());
}

/// Distillation loss for one head user: w * ||p_u - G_U(f(last R items))||^2
/// with p_u encoded from the full train sequence and held constant.
inline double user_branch_loss(const ModelParams& p, const EncoderConfig& cfg, const std::vector<int>& train_seq,
                               int r_recent, double weight, const EmbeddingEnhancer* enhancer = nullptr) {
  VectorXd target = encode_sequence(p, cfg, train_seq, enhancer);
  VectorXd rbar = encode_sequence(p, cfg, truncate_recent(train_seq, r_recent), enhancer);
  VectorXd delta = target - user_generator_apply(p, rbar);
  return weight * delta.squaredNorm();
}

/// Distillation loss for one head item: w * ||q_i - G_I(rhat_i)||^2 with
/// rhat_i the enhanced mean over K sampled subsequences and q_i constant.
inline double item_branch_loss(const ModelParams& p, const EncoderConfig& cfg, const SubsequenceIndex& index,
                               int item, int k, double weight, double beta,
                               const std::map<int, VectorXd>& full_user_reps, Rng& rng,
                               const EmbeddingEnhancer* enhancer = nullptr, bool enhance_inputs = true) {
  std::vector<Subsequence> sampled = sample_subsequences(index, item, k, rng);
  VectorXd rhat =
      contextualized_item_rep(p, cfg, index, item, &sampled, enhance_inputs, beta, &full_user_reps, enhancer);
  VectorXd delta = p.item_emb.row(item).transpose() - item_generator_apply(p, rhat);
  return weight * delta.squaredNorm();
}

// ---------------------------------------------------------------------------
// batched evaluation with exact gradients

// One optimizer step's worth of work. Targets and the per-subsequence
// representations are snapshots taken when the plan was built; they stay
// fixed while the loss is (re)evaluated, which is exactly the stop-gradient
// semantics the analytic backward implements.
struct RecEntry {
  std::vector<int> inputs;     // already truncated to max_len
  std::vector<int> positives;  // aligned with inputs
  std::vector<int> negatives;  // aligned with inputs
};

struct UserEntry {
  std::vector<int> truncated;  // last R items of the train sequence
  double weight = 0.0;
  VectorXd target;  // p_u snapshot
};

struct ItemEntry {
  int item = 0;
  double weight = 0.0;
  VectorXd target;                    // q_i snapshot
  std::vector<VectorXd> sub_reps;     // f(S-hat) snapshots
  std::vector<VectorXd> owner_reps;   // p_owner snapshots
};

struct BatchPlan {
  std::vector<RecEntry> rec;
  std::vector<UserEntry> users;
  std::vector<ItemEntry> items;
  double beta = 1.0;
  bool enhance_item_inputs = true;  // apply G_U + beta*p inside rhat_i
};

struct DropoutKeys {
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
  std::uint64_t batch = 0;
};

/// Builds a rec entry from a train sequence, sampling one uniform negative
/// per position (never equal to the positive).
inline RecEntry make_rec_entry(const std::vector<int>& train_seq, const EncoderConfig& cfg, int n_items, Rng& rng) {
  if (train_seq.size() < 2) throw DataError("loss error: sequence has no next-item pair");
  RecEntry e;
  e.inputs.assign(train_seq.begin(), train_seq.end() - 1);
  e.positives.assign(train_seq.begin() + 1, train_seq.end());
  if (e.inputs.size() > static_cast<std::size_t>(cfg.max_len)) {
    e.inputs.erase(e.inputs.begin(), e.inputs.end() - cfg.max_len);
    e.positives.erase(e.positives.begin(), e.positives.end() - cfg.max_len);
  }
  e.negatives.reserve(e.positives.size());
  for (int pos_item : e.positives) {
    int neg = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_items)));
    while (neg == pos_item) neg = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_items)));
    e.negatives.push_back(neg);
  }
  return e;
}

/// Evaluates one batch and, when `grads` is given, accumulates the exact
/// gradient of the total loss. rec is the mean of per-sequence losses; the
/// branch components are sums of weighted squared distances. Entries with
/// zero weight contribute exactly zero and are skipped. Each encoder pass
/// derives its own dropout stream, so the draws seen by one entry never
/// depend on which other entries exist.
inline LossBreakdown eval_batch(const ModelParams& p, const EncoderConfig& cfg, const EmbeddingEnhancer* enhancer,
                                const BatchPlan& plan, double lambda_u, double lambda_i, bool train_mode,
                                const DropoutKeys& keys, ModelParams* grads) {
  double rec_sum = 0.0;
  const double rec_scale = plan.rec.empty() ? 0.0 : 1.0 / static_cast<double>(plan.rec.size());
  for (std::size_t idx = 0; idx < plan.rec.size(); ++idx) {
    const RecEntry& e = plan.rec[idx];
    Rng drop = derive_rng(keys.seed, Stream::dropout, keys.epoch, keys.batch, idx);
    EncodeTape tape;
    MatrixXd y = encode_all(p, cfg, e.inputs, enhancer, train_mode, &drop, grads != nullptr ? &tape : nullptr);
    const Eigen::Index n = y.rows();
    const double pos_scale = 1.0 / static_cast<double>(n);
    MatrixXd dy = grads != nullptr ? MatrixXd::Zero(n, cfg.d) : MatrixXd();
    double entry_loss = 0.0;
    for (Eigen::Index pos = 0; pos < n; ++pos) {
      const int it_pos = e.positives[static_cast<std::size_t>(pos)];
      const int it_neg = e.negatives[static_cast<std::size_t>(pos)];
      const double s_pos = y.row(pos).dot(p.item_emb.row(it_pos));
      const double s_neg = y.row(pos).dot(p.item_emb.row(it_neg));
      entry_loss += detail::softplus(-s_pos) + detail::softplus(s_neg);
      if (grads != nullptr) {
        const double ds_pos = (detail::sigmoid(s_pos) - 1.0) * pos_scale * rec_scale;
        const double ds_neg = detail::sigmoid(s_neg) * pos_scale * rec_scale;
        dy.row(pos) += ds_pos * p.item_emb.row(it_pos) + ds_neg * p.item_emb.row(it_neg);
        grads->item_emb.row(it_pos) += ds_pos * y.row(pos);
        grads->item_emb.row(it_neg) += ds_neg * y.row(pos);
      }
    }
    rec_sum += entry_loss * pos_scale;
    if (grads != nullptr) encode_backward(p, cfg, tape, dy, *grads);
  }
  const double rec = rec_sum * rec_scale;

  double user_sum = 0.0;
  for (std::size_t idx = 0; idx < plan.users.size(); ++idx) {
    const UserEntry& e = plan.users[idx];
    if (e.weight == 0.0) continue;
    Rng drop = derive_rng(keys.seed, Stream::dropout, keys.epoch, keys.batch, (1ULL << 32) | idx);
    EncodeTape tape;
    const bool want_grad = grads != nullptr && lambda_u != 0.0;
    VectorXd rbar =
        encode_sequence(p, cfg, e.truncated, enhancer, train_mode, &drop, want_grad ? &tape : nullptr);
    VectorXd delta = e.target - user_generator_apply(p, rbar);
    user_sum += e.weight * delta.squaredNorm();
    if (want_grad) {
      VectorXd dgen = (-2.0 * e.weight * lambda_u) * delta;
      grads->user_gen_w += dgen * rbar.transpose();
      grads->user_gen_b.col(0) += dgen;
      VectorXd drbar = p.user_gen_w.transpose() * dgen;
      MatrixXd dy = MatrixXd::Zero(static_cast<Eigen::Index>(tape.items.size()), cfg.d);
      dy.row(dy.rows() - 1) = drbar.transpose();
      encode_backward(p, cfg, tape, dy, *grads);
    }
  }

  double item_sum = 0.0;
  for (const ItemEntry& e : plan.items) {
    if (e.weight == 0.0) continue;
    const double inv_k = 1.0 / static_cast<double>(e.sub_reps.size());
    VectorXd rhat = VectorXd::Zero(cfg.d);
    for (std::size_t k = 0; k < e.sub_reps.size(); ++k) {
      if (plan.enhance_item_inputs)
        rhat += enhance_tail_user_rep(p, e.sub_reps[k], e.owner_reps[k], plan.beta);
      else
        rhat += e.sub_reps[k];
    }
    rhat *= inv_k;
    VectorXd delta = e.target - item_generator_apply(p, rhat);
    item_sum += e.weight * delta.squaredNorm();
    if (grads != nullptr && lambda_i != 0.0) {
      VectorXd dgen = (-2.0 * e.weight * lambda_i) * delta;
      grads->item_gen_w += dgen * rhat.transpose();
      grads->item_gen_b.col(0) += dgen;
      if (plan.enhance_item_inputs) {
        VectorXd drhat = p.item_gen_w.transpose() * dgen;
        for (const VectorXd& sub : e.sub_reps) {
          grads->user_gen_w += (inv_k * drhat) * sub.transpose();
          grads->user_gen_b.col(0) += inv_k * drhat;
        }
      }
    }
  }

  return total_loss(rec, user_sum, item_sum, lambda_u, lambda_i);
}

}  // namespace tailseq
