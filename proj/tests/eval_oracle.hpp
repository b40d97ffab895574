#pragma once

#include <cmath>
#include <set>
#include <vector>

#include "tailseq/evaluate.hpp"

namespace testutil {

// Exhaustive-sort oracle for the evaluation protocol: counting-based ranks
// and straight-line aggregation, independent of the sorted-list path inside
// evaluate().
struct OracleOutcome {
  std::vector<int> ranks;
  double overall_hr = 0.0, overall_ndcg = 0.0;
  double group_hr[4] = {0, 0, 0, 0};  // head_user, tail_user, head_item, tail_item
  long group_n[4] = {0, 0, 0, 0};
};

inline OracleOutcome oracle_evaluate(const tailseq::ModelParams& p, const tailseq::EncoderConfig& enc,
                                     const tailseq::SplitDataset& split, const tailseq::HeadTailPartition& part,
                                     const tailseq::SubsequenceIndex& index, const tailseq::EvalConfig& ecfg,
                                     const tailseq::InferenceOptions& opt) {
  using namespace tailseq;
  OracleOutcome out;
  InferenceContext ictx = build_inference_context(p, enc, split, part, index, opt);
  EmbeddingEnhancer enh{&part, &ictx.tail_ctx, opt.gamma};
  for (int u = 0; u < split.n_users(); ++u) {
    std::set<int> consumed(split.train[static_cast<std::size_t>(u)].begin(),
                           split.train[static_cast<std::size_t>(u)].end());
    consumed.insert(split.valid[static_cast<std::size_t>(u)]);
    consumed.insert(split.test[static_cast<std::size_t>(u)]);
    std::vector<int> input = split.train[static_cast<std::size_t>(u)];
    int gt = split.valid[static_cast<std::size_t>(u)];
    if (ecfg.target == EvalConfig::Target::test) {
      input.push_back(split.valid[static_cast<std::size_t>(u)]);
      gt = split.test[static_cast<std::size_t>(u)];
    }
    std::vector<int> candidates = sample_negatives(u, split.n_items, consumed, ecfg.n_negatives, ecfg.seed);
    candidates.push_back(gt);

    VectorXd r = encode_sequence(p, enc, input, opt.enhanced ? &enh : nullptr);
    VectorXd rep = r;
    if (opt.enhanced && !part.head_user(u)) rep = enhance_tail_user_rep(p, r, r, opt.beta);
    auto score_of = [&](int item) {
      VectorXd q = p.item_emb.row(item).transpose();
      if (opt.enhanced && !part.head_item(item)) {
        auto it = ictx.tail_ctx.find(item);
        if (it != ictx.tail_ctx.end()) q = item_generator_apply(p, it->second) + opt.gamma * q;
      }
      return rep.dot(q);
    };

    const double gt_score = score_of(gt);
    int rank = 1;
    for (int c : candidates) {
      if (c == gt) continue;
      const double s = score_of(c);
      if (s > gt_score || (s == gt_score && c < gt)) ++rank;
    }
    out.ranks.push_back(rank);
    const double hit = rank <= ecfg.k ? 1.0 : 0.0;
    const double ndcg = rank <= ecfg.k ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
    out.overall_hr += hit;
    out.overall_ndcg += ndcg;
    const int ug = part.head_user(u) ? 0 : 1;
    const int ig = part.head_item(gt) ? 2 : 3;
    out.group_hr[ug] += hit;
    out.group_n[ug] += 1;
    out.group_hr[ig] += hit;
    out.group_n[ig] += 1;
  }
  out.overall_hr /= static_cast<double>(out.ranks.size());
  out.overall_ndcg /= static_cast<double>(out.ranks.size());
  for (int g = 0; g < 4; ++g)
    if (out.group_n[g] > 0) out.group_hr[g] /= static_cast<double>(out.group_n[g]);
  return out;
}

}  // namespace testutil
