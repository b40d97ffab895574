#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tailseq/errors.hpp"
#include "tailseq/partition.hpp"
#include "tailseq/rng.hpp"

namespace tailseq {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct EncoderConfig {
  int d = 50;
  int max_len = 50;
  int n_blocks = 1;
  int n_heads = 2;
  double dropout_rate = 0.2;

  void validate() const {
    if (d < 1 || max_len < 1 || n_blocks < 0 || n_heads < 1)
      throw ConfigError("encoder: d, max_len, n_heads must be positive; n_blocks non-negative");
    if (d % n_heads != 0) throw ConfigError("encoder: d must be divisible by n_heads");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ConfigError("encoder: dropout_rate must be in [0, 1)");
  }
};

// Row-vector convention for sequence tensors: Y = X * W + b^T, with biases
// stored as d x 1 matrices so every parameter is a MatrixXd.
struct AttnBlock {
  MatrixXd wq, wk, wv, wo;
  MatrixXd bq, bk, bv, bo;
  MatrixXd w1, w2;
  MatrixXd b1, b2;
  MatrixXd ln1_g, ln1_b, ln2_g, ln2_b;
};

/// All trainable state: item embedding table (last row is the padding slot,
/// pinned at zero), positional embeddings, attention blocks, and the two
/// affine embedding generators (column convention: G(r) = W r + b).
struct ModelParams {
  int n_items = 0;
  MatrixXd item_emb;  // (n_items + 1) x d
  MatrixXd pos_emb;   // max_len x d
  std::vector<AttnBlock> blocks;
  MatrixXd final_ln_g, final_ln_b;
  MatrixXd user_gen_w, user_gen_b;
  MatrixXd item_gen_w, item_gen_b;

  int pad_id() const { return n_items; }
  int dim() const { return static_cast<int>(item_emb.cols()); }
};

namespace detail {
inline void fill_uniform(MatrixXd& m, double scale, Rng& rng) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = scale * (2.0 * rng.uniform() - 1.0);
}
}  // namespace detail

/// Embeddings and projections start uniform in [-1/sqrt(d), 1/sqrt(d)];
/// layer norms start as identity; generators start at exactly zero so the
/// enhanced paths are a no-op until fine-tuning moves them.
inline ModelParams init_params(const EncoderConfig& cfg, int n_items, std::uint64_t seed) {
  cfg.validate();
  if (n_items < 1) throw ConfigError("init_params: n_items must be positive");
  const int d = cfg.d;
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  Rng rng = derive_rng(seed, Stream::init);

  ModelParams p;
  p.n_items = n_items;
  p.item_emb = MatrixXd::Zero(n_items + 1, d);
  {
    MatrixXd real = MatrixXd::Zero(n_items, d);
    detail::fill_uniform(real, s, rng);
    p.item_emb.topRows(n_items) = real;  // pad row stays zero
  }
  p.pos_emb = MatrixXd::Zero(cfg.max_len, d);
  detail::fill_uniform(p.pos_emb, s, rng);

  p.blocks.resize(static_cast<std::size_t>(cfg.n_blocks));
  for (auto& blk : p.blocks) {
    for (MatrixXd* w : {&blk.wq, &blk.wk, &blk.wv, &blk.wo, &blk.w1, &blk.w2}) {
      *w = MatrixXd::Zero(d, d);
      detail::fill_uniform(*w, s, rng);
    }
    for (MatrixXd* b : {&blk.bq, &blk.bk, &blk.bv, &blk.bo, &blk.b1, &blk.b2}) *b = MatrixXd::Zero(d, 1);
    blk.ln1_g = MatrixXd::Ones(d, 1);
    blk.ln1_b = MatrixXd::Zero(d, 1);
    blk.ln2_g = MatrixXd::Ones(d, 1);
    blk.ln2_b = MatrixXd::Zero(d, 1);
  }
  p.final_ln_g = MatrixXd::Ones(d, 1);
  p.final_ln_b = MatrixXd::Zero(d, 1);
  p.user_gen_w = MatrixXd::Zero(d, d);
  p.user_gen_b = MatrixXd::Zero(d, 1);
  p.item_gen_w = MatrixXd::Zero(d, d);
  p.item_gen_b = MatrixXd::Zero(d, 1);
  return p;
}

inline ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  z.item_emb.setZero();
  z.pos_emb.setZero();
  for (auto& blk : z.blocks) {
    blk.wq.setZero();
    blk.wk.setZero();
    blk.wv.setZero();
    blk.wo.setZero();
    blk.bq.setZero();
    blk.bk.setZero();
    blk.bv.setZero();
    blk.bo.setZero();
    blk.w1.setZero();
    blk.w2.setZero();
    blk.b1.setZero();
    blk.b2.setZero();
    blk.ln1_g.setZero();
    blk.ln1_b.setZero();
    blk.ln2_g.setZero();
    blk.ln2_b.setZero();
  }
  z.final_ln_g.setZero();
  z.final_ln_b.setZero();
  z.user_gen_w.setZero();
  z.user_gen_b.setZero();
  z.item_gen_w.setZero();
  z.item_gen_b.setZero();
  return z;
}

/// Named views over every tensor in a fixed, documented order. The same
/// order drives the optimizer, gradient checks, and the checkpoint layout.
inline std::vector<std::pair<std::string, MatrixXd*>> tensor_views(ModelParams& p) {
  std::vector<std::pair<std::string, MatrixXd*>> v;
  v.emplace_back("item_emb", &p.item_emb);
  v.emplace_back("pos_emb", &p.pos_emb);
  for (std::size_t b = 0; b < p.blocks.size(); ++b) {
    auto& blk = p.blocks[b];
    const std::string pre = "blk" + std::to_string(b) + ".";
    v.emplace_back(pre + "wq", &blk.wq);
    v.emplace_back(pre + "bq", &blk.bq);
    v.emplace_back(pre + "wk", &blk.wk);
    v.emplace_back(pre + "bk", &blk.bk);
    v.emplace_back(pre + "wv", &blk.wv);
    v.emplace_back(pre + "bv", &blk.bv);
    v.emplace_back(pre + "wo", &blk.wo);
    v.emplace_back(pre + "bo", &blk.bo);
    v.emplace_back(pre + "ln1_g", &blk.ln1_g);
    v.emplace_back(pre + "ln1_b", &blk.ln1_b);
    v.emplace_back(pre + "w1", &blk.w1);
    v.emplace_back(pre + "b1", &blk.b1);
    v.emplace_back(pre + "w2", &blk.w2);
    v.emplace_back(pre + "b2", &blk.b2);
    v.emplace_back(pre + "ln2_g", &blk.ln2_g);
    v.emplace_back(pre + "ln2_b", &blk.ln2_b);
  }
  v.emplace_back("final_ln_g", &p.final_ln_g);
  v.emplace_back("final_ln_b", &p.final_ln_b);
  v.emplace_back("user_gen_w", &p.user_gen_w);
  v.emplace_back("user_gen_b", &p.user_gen_b);
  v.emplace_back("item_gen_w", &p.item_gen_w);
  v.emplace_back("item_gen_b", &p.item_gen_b);
  return v;
}

inline std::vector<std::pair<std::string, const MatrixXd*>> tensor_views(const ModelParams& p) {
  std::vector<std::pair<std::string, const MatrixXd*>> v;
  for (auto& [name, m] : tensor_views(const_cast<ModelParams&>(p))) v.emplace_back(name, m);
  return v;
}

// ---------------------------------------------------------------------------
// embedding generators and enhancement (the knowledge-transfer maps)

inline VectorXd user_generator_apply(const ModelParams& p, const VectorXd& r) {
  return p.user_gen_w * r + p.user_gen_b.col(0);
}

inline VectorXd item_generator_apply(const ModelParams& p, const VectorXd& r) {
  return p.item_gen_w * r + p.item_gen_b.col(0);
}

/// Enhanced tail-user representation: G_U(r_u) + beta * p_u.
inline VectorXd enhance_tail_user_rep(const ModelParams& p, const VectorXd& r_u, const VectorXd& p_u, double beta) {
  return user_generator_apply(p, r_u) + beta * p_u;
}

/// Enhanced item embedding: tail items get G_I(r_i) + gamma * q_i, head
/// items keep their learned embedding unchanged.
inline VectorXd enhance_item_embedding(const ModelParams& p, int item, const VectorXd& r_i, double gamma,
                                       const HeadTailPartition& part) {
  if (part.head_item(item)) return p.item_emb.row(item).transpose();
  return item_generator_apply(p, r_i) + gamma * p.item_emb.row(item).transpose();
}

}  // namespace tailseq
