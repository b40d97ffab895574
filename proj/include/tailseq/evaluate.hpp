#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "tailseq/losses.hpp"
#include "tailseq/partition.hpp"

namespace tailseq {

struct EvalConfig {
  int k = 10;
  int n_negatives = 100;
  std::uint64_t seed = 0;
  enum class Target { validation, test } target = Target::test;

  void validate() const {
    if (k < 1) throw ConfigError("eval: k must be >= 1");
    if (n_negatives < 1) throw ConfigError("eval: n_negatives must be >= 1");
  }
};

inline double hit_at_k(int rank, int k) {
  if (rank < 1) throw DataError("hit_at_k: rank must be >= 1");
  return rank <= k ? 1.0 : 0.0;
}

/// Single relevant item, so ideal DCG is 1 and NDCG reduces to the discount.
inline double ndcg_at_k(int rank, int k) {
  if (rank < 1) throw DataError("ndcg_at_k: rank must be >= 1");
  return rank <= k ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
}

/// n distinct items the user never interacted with, uniform without
/// replacement, deterministic per (seed, user).
inline std::vector<int> sample_negatives(int user, int n_items, const std::set<int>& consumed, int n,
                                         std::uint64_t seed) {
  std::vector<int> pool;
  pool.reserve(static_cast<std::size_t>(n_items));
  for (int i = 0; i < n_items; ++i)
    if (consumed.find(i) == consumed.end()) pool.push_back(i);
  if (static_cast<int>(pool.size()) < n)
    throw DataError("evaluation error: user " + std::to_string(user) + " has only " + std::to_string(pool.size()) +
                    " candidate negatives, needs " + std::to_string(n));
  Rng rng = derive_rng(seed, Stream::eval_negatives, static_cast<std::uint64_t>(user));
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int idx : rng.sample_indices(static_cast<int>(pool.size()), n)) out.push_back(pool[static_cast<std::size_t>(idx)]);
  return out;
}

// ---------------------------------------------------------------------------
// inference-time enhancement

struct InferenceOptions {
  bool enhanced = true;  // false evaluates the plain backbone path
  double beta = 1.0;
  double gamma = 0.0;
  int ctx_cap = 64;
};

/// Frozen per-evaluation state: contextualized representations for every
/// tail item that has at least one training subsequence. Subsequence
/// representations are enhanced through the user generator before averaging;
/// the encoder passes themselves embed raw item rows (the cache is rebuilt
/// from scratch, so there is no previous cache to enhance inputs with).
struct InferenceContext {
  bool enhanced = false;
  double beta = 1.0;
  double gamma = 0.0;
  std::map<int, VectorXd> tail_ctx;
  int tail_without_context = 0;  // tail items falling back to raw q_i
};

inline InferenceContext build_inference_context(const ModelParams& p, const EncoderConfig& cfg,
                                                const SplitDataset& split, const HeadTailPartition& part,
                                                const SubsequenceIndex& index, const InferenceOptions& opt) {
  InferenceContext ictx;
  ictx.enhanced = opt.enhanced;
  ictx.beta = opt.beta;
  ictx.gamma = opt.gamma;
  if (!opt.enhanced) return ictx;

  std::vector<std::optional<VectorXd>> owner_rep(static_cast<std::size_t>(split.n_users()));
  auto rep_of = [&](int u) -> const VectorXd& {
    auto& slot = owner_rep[static_cast<std::size_t>(u)];
    if (!slot.has_value()) slot = encode_sequence(p, cfg, split.train[static_cast<std::size_t>(u)]);
    return *slot;
  };

  for (int item = 0; item < split.n_items; ++item) {
    if (part.head_item(item)) continue;
    const auto& pool = index.at(item);
    if (pool.empty()) {
      ++ictx.tail_without_context;
      continue;
    }
    VectorXd acc = VectorXd::Zero(cfg.d);
    const auto chosen = strided_subset(static_cast<int>(pool.size()), opt.ctx_cap);
    for (int idx : chosen) {
      const Subsequence& sub = pool[static_cast<std::size_t>(idx)];
      VectorXd r = encode_sequence(p, cfg, sub.items);
      acc += enhance_tail_user_rep(p, r, rep_of(sub.owner), opt.beta);
    }
    ictx.tail_ctx.emplace(item, acc / static_cast<double>(chosen.size()));
  }
  return ictx;
}

// ---------------------------------------------------------------------------
// scoring and ranking

struct ScoredItem {
  int item = 0;
  double score = 0.0;
};

/// Scores candidates by dot product against the user representation and
/// returns them sorted by score descending, ties broken by item id
/// ascending. Tail users and tail items go through their generators when
/// enhancement is on; a tail candidate without any training subsequence
/// falls back to its raw embedding.
inline std::vector<ScoredItem> score_candidates(const ModelParams& p, const EncoderConfig& cfg,
                                                const HeadTailPartition& part, const InferenceContext& ictx,
                                                int user, const std::vector<int>& input_seq,
                                                const std::vector<int>& candidates) {
  if (candidates.empty()) throw DataError("score_candidates: empty candidate list");
  if (input_seq.empty()) throw DataError("score_candidates: empty input sequence");

  EmbeddingEnhancer enhancer{&part, &ictx.tail_ctx, ictx.gamma};
  VectorXd r = encode_sequence(p, cfg, input_seq, ictx.enhanced ? &enhancer : nullptr);
  VectorXd rep = r;
  if (ictx.enhanced && !part.head_user(user)) rep = enhance_tail_user_rep(p, r, r, ictx.beta);

  std::vector<ScoredItem> scored;
  scored.reserve(candidates.size());
  for (int item : candidates) {
    VectorXd q = p.item_emb.row(item).transpose();
    if (ictx.enhanced && !part.head_item(item)) {
      auto it = ictx.tail_ctx.find(item);
      if (it != ictx.tail_ctx.end()) q = item_generator_apply(p, it->second) + ictx.gamma * q;
    }
    scored.push_back({item, rep.dot(q)});
  }
  std::sort(scored.begin(), scored.end(), [](const ScoredItem& a, const ScoredItem& b) {
    return a.score != b.score ? a.score > b.score : a.item < b.item;
  });
  return scored;
}

// ---------------------------------------------------------------------------
// group-wise report

struct UserRecord {
  int user = 0;
  int gt_item = 0;
  int rank = 0;
  double hit = 0.0;
  double ndcg = 0.0;
  bool user_head = false;
  bool item_head = false;
};

struct GroupStat {
  long n = 0;
  double hr = 0.0;
  double ndcg = 0.0;
  bool present() const { return n > 0; }
};

struct MetricsReport {
  std::vector<UserRecord> records;
  GroupStat overall, head_user, tail_user, head_item, tail_item;
  GroupStat hh, ht, th, tt;  // (user group, ground-truth item group) cells
  bool mean_present = false;
  double mean_hr = 0.0;
  double mean_ndcg = 0.0;
  int k = 10;
  int tail_without_context = 0;
};

/// Ranks the ground-truth item of every user against sampled negatives and
/// aggregates per the group layout: overall, head/tail user, head/tail item
/// (by the ground-truth item's group), their four-way crossing, and the
/// mean of the four group scores (reported only when all four are present).
inline MetricsReport evaluate(const ModelParams& p, const EncoderConfig& cfg, const SplitDataset& split,
                              const HeadTailPartition& part, const SubsequenceIndex& index, const EvalConfig& ecfg,
                              const InferenceOptions& opt) {
  ecfg.validate();
  InferenceContext ictx = build_inference_context(p, cfg, split, part, index, opt);

  MetricsReport report;
  report.k = ecfg.k;
  report.tail_without_context = ictx.tail_without_context;
  auto add = [](GroupStat& g, double hit, double ndcg) {
    g.n += 1;
    g.hr += hit;
    g.ndcg += ndcg;
  };

  for (int u = 0; u < split.n_users(); ++u) {
    const auto& train = split.train[static_cast<std::size_t>(u)];
    std::set<int> consumed(train.begin(), train.end());
    consumed.insert(split.valid[static_cast<std::size_t>(u)]);
    consumed.insert(split.test[static_cast<std::size_t>(u)]);

    std::vector<int> input = train;
    int gt = split.valid[static_cast<std::size_t>(u)];
    if (ecfg.target == EvalConfig::Target::test) {
      input.push_back(split.valid[static_cast<std::size_t>(u)]);
      gt = split.test[static_cast<std::size_t>(u)];
    }

    std::vector<int> candidates = sample_negatives(u, split.n_items, consumed, ecfg.n_negatives, ecfg.seed);
    candidates.push_back(gt);
    std::vector<ScoredItem> ranked = score_candidates(p, cfg, part, ictx, u, input, candidates);

    int rank = 0;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      if (ranked[i].item == gt) {
        rank = static_cast<int>(i) + 1;
        break;
      }
    }

    UserRecord rec;
    rec.user = u;
    rec.gt_item = gt;
    rec.rank = rank;
    rec.hit = hit_at_k(rank, ecfg.k);
    rec.ndcg = ndcg_at_k(rank, ecfg.k);
    rec.user_head = part.head_user(u);
    rec.item_head = part.head_item(gt);
    report.records.push_back(rec);

    add(report.overall, rec.hit, rec.ndcg);
    add(rec.user_head ? report.head_user : report.tail_user, rec.hit, rec.ndcg);
    add(rec.item_head ? report.head_item : report.tail_item, rec.hit, rec.ndcg);
    GroupStat& cell = rec.user_head ? (rec.item_head ? report.hh : report.ht)
                                    : (rec.item_head ? report.th : report.tt);
    add(cell, rec.hit, rec.ndcg);
  }

  for (GroupStat* g : {&report.overall, &report.head_user, &report.tail_user, &report.head_item, &report.tail_item,
                       &report.hh, &report.ht, &report.th, &report.tt}) {
    if (g->n > 0) {
      g->hr /= static_cast<double>(g->n);
      g->ndcg /= static_cast<double>(g->n);
    }
  }
  if (report.head_user.present() && report.tail_user.present() && report.head_item.present() &&
      report.tail_item.present()) {
    report.mean_present = true;
    report.mean_hr =
        (report.head_user.hr + report.tail_user.hr + report.head_item.hr + report.tail_item.hr) / 4.0;
    report.mean_ndcg =
        (report.head_user.ndcg + report.tail_user.ndcg + report.head_item.ndcg + report.tail_item.ndcg) / 4.0;
  }
  return report;
}

}  // namespace tailseq
