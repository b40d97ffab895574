#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <vector>

#include "tailseq/params.hpp"

namespace tailseq {

// Causal self-attention sequence encoder. One forward pass handles a single
// sequence (no padding needed); the tape captures every intermediate needed
// for the exact backward pass.

constexpr double kLayerNormEps = 1e-8;

/// Input-side enhancement (the mutual-enhancement hook): tail items with a
/// cached contextualized representation are embedded as G_I(r_i) + gamma*q_i
/// instead of q_i. The cached r_i vectors are constants for gradients; the
/// generator and q_i parts are differentiated.
struct EmbeddingEnhancer {
  const HeadTailPartition* partition = nullptr;
  const std::map<int, VectorXd>* ctx = nullptr;  // tail item -> r_i
  double gamma = 0.0;

  const VectorXd* lookup(int item) const {
    if (partition == nullptr || ctx == nullptr) return nullptr;
    if (partition->head_item(item)) return nullptr;
    auto it = ctx->find(item);
    return it == ctx->end() ? nullptr : &it->second;
  }
};

struct LnCache {
  MatrixXd xhat;
  VectorXd inv_std;
};

struct BlockTape {
  MatrixXd x_in;
  LnCache ln1;
  MatrixXd a;
  MatrixXd q, k, v;
  std::vector<MatrixXd> attn;  // per head, causal row-softmax
  MatrixXd concat;
  MatrixXd attn_drop;  // empty when dropout off
  MatrixXd h1;
  LnCache ln2;
  MatrixXd bnorm;
  MatrixXd f1;
  MatrixXd relu;
};

struct EncodeTape {
  std::vector<int> items;  // after truncation to the most recent max_len
  std::vector<const VectorXd*> ctx_used;
  double gamma = 0.0;
  MatrixXd emb_drop;  // empty when dropout off
  std::vector<BlockTape> blocks;
  MatrixXd x_last;  // input to the final layer norm
  LnCache final_ln;
  MatrixXd y;  // hidden states, one row per position
};

namespace detail {

inline MatrixXd layer_norm(const MatrixXd& x, const MatrixXd& g, const MatrixXd& b, LnCache& cache) {
  const Eigen::Index n = x.rows(), d = x.cols();
  cache.xhat.resize(n, d);
  cache.inv_std.resize(n);
  MatrixXd out(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.inv_std(i) = inv;
    cache.xhat.row(i) = (x.row(i).array() - mu) * inv;
    out.row(i) = cache.xhat.row(i).cwiseProduct(g.col(0).transpose()) + b.col(0).transpose();
  }
  return out;
}

inline MatrixXd layer_norm_bwd(const MatrixXd& dy, const MatrixXd& g, const LnCache& cache, MatrixXd& dg,
                               MatrixXd& db) {
  const Eigen::Index n = dy.rows(), d = dy.cols();
  MatrixXd dx(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::RowVectorXd dxhat = dy.row(i).cwiseProduct(g.col(0).transpose());
    const double m1 = dxhat.mean();
    const double m2 = dxhat.cwiseProduct(cache.xhat.row(i)).mean();
    dx.row(i) = (cache.inv_std(i) * (dxhat.array() - m1 - cache.xhat.row(i).array() * m2)).matrix();
    dg.col(0) += dy.row(i).cwiseProduct(cache.xhat.row(i)).transpose();
    db.col(0) += dy.row(i).transpose();
  }
  return dx;
}

inline MatrixXd affine(const MatrixXd& x, const MatrixXd& w, const MatrixXd& b) {
  return (x * w).rowwise() + b.col(0).transpose();
}

inline MatrixXd dropout_mask(Eigen::Index n, Eigen::Index d, double rate, Rng& rng) {
  MatrixXd m(n, d);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < d; ++c) m(r, c) = rng.uniform() < rate ? 0.0 : keep_scale;
  return m;
}

// Row-wise causal softmax over columns 0..i.
inline void causal_softmax(MatrixXd& s) {
  const Eigen::Index n = s.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    double mx = s(i, 0);
    for (Eigen::Index j = 1; j <= i; ++j) mx = std::max(mx, s(i, j));
    double sum = 0.0;
    for (Eigen::Index j = 0; j <= i; ++j) {
      s(i, j) = std::exp(s(i, j) - mx);
      sum += s(i, j);
    }
    for (Eigen::Index j = 0; j <= i; ++j) s(i, j) /= sum;
    for (Eigen::Index j = i + 1; j < n; ++j) s(i, j) = 0.0;
  }
}

inline MatrixXd softmax_bwd(const MatrixXd& a, const MatrixXd& da) {
  MatrixXd ds(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double dot = a.row(i).cwiseProduct(da.row(i)).sum();
    ds.row(i) = (a.row(i).array() * (da.row(i).array() - dot)).matrix();
  }
  return ds;
}

}  // namespace detail

/// Hidden states for every position (n x d). Inputs longer than max_len are
/// left-truncated to the most recent max_len items. Dropout draws only in
/// train_mode, from the supplied stream.
inline MatrixXd encode_all(const ModelParams& p, const EncoderConfig& cfg, const std::vector<int>& items_in,
                           const EmbeddingEnhancer* enhancer = nullptr, bool train_mode = false,
                           Rng* dropout_rng = nullptr, EncodeTape* tape = nullptr) {
  if (items_in.empty()) throw DataError("encoding error: empty input sequence");
  std::vector<int> items = items_in;
  if (items.size() > static_cast<std::size_t>(cfg.max_len))
    items.erase(items.begin(), items.end() - cfg.max_len);
  const Eigen::Index n = static_cast<Eigen::Index>(items.size());
  const Eigen::Index d = cfg.d;
  const bool use_dropout = train_mode && cfg.dropout_rate > 0.0;
  if (use_dropout && dropout_rng == nullptr)
    throw NumericError("encode_all: dropout requested without a random stream");

  EncodeTape local;
  EncodeTape& t = tape != nullptr ? *tape : local;
  t = EncodeTape{};
  t.items = items;
  t.ctx_used.assign(items.size(), nullptr);
  t.gamma = enhancer != nullptr ? enhancer->gamma : 0.0;

  MatrixXd x(n, d);
  for (Eigen::Index pos = 0; pos < n; ++pos) {
    const int item = items[static_cast<std::size_t>(pos)];
    if (item < 0 || item >= p.n_items)
      throw DataError("encoding error: unknown item id " + std::to_string(item));
    const VectorXd* ctx = enhancer != nullptr ? enhancer->lookup(item) : nullptr;
    if (ctx != nullptr) {
      t.ctx_used[static_cast<std::size_t>(pos)] = ctx;
      x.row(pos) = (item_generator_apply(p, *ctx) + t.gamma * p.item_emb.row(item).transpose()).transpose();
    } else {
      x.row(pos) = p.item_emb.row(item);
    }
    x.row(pos) += p.pos_emb.row(pos);
  }
  if (use_dropout) {
    t.emb_drop = detail::dropout_mask(n, d, cfg.dropout_rate, *dropout_rng);
    x = x.cwiseProduct(t.emb_drop);
  }

  const Eigen::Index dh = d / cfg.n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  t.blocks.resize(p.blocks.size());
  for (std::size_t bi = 0; bi < p.blocks.size(); ++bi) {
    const AttnBlock& blk = p.blocks[bi];
    BlockTape& bt = t.blocks[bi];
    bt.x_in = x;
    bt.a = detail::layer_norm(x, blk.ln1_g, blk.ln1_b, bt.ln1);
    bt.q = detail::affine(bt.a, blk.wq, blk.bq);
    bt.k = detail::affine(bt.a, blk.wk, blk.bk);
    bt.v = detail::affine(bt.a, blk.wv, blk.bv);
    bt.concat.resize(n, d);
    bt.attn.resize(static_cast<std::size_t>(cfg.n_heads));
    for (int h = 0; h < cfg.n_heads; ++h) {
      auto qh = bt.q.middleCols(h * dh, dh);
      auto kh = bt.k.middleCols(h * dh, dh);
      auto vh = bt.v.middleCols(h * dh, dh);
      MatrixXd s = (qh * kh.transpose()) * scale;
      detail::causal_softmax(s);
      bt.attn[static_cast<std::size_t>(h)] = s;
      bt.concat.middleCols(h * dh, dh) = s * vh;
    }
    MatrixXd o = detail::affine(bt.concat, blk.wo, blk.bo);
    if (use_dropout) {
      bt.attn_drop = detail::dropout_mask(n, d, cfg.dropout_rate, *dropout_rng);
      o = o.cwiseProduct(bt.attn_drop);
    }
    bt.h1 = x + o;
    bt.bnorm = detail::layer_norm(bt.h1, blk.ln2_g, blk.ln2_b, bt.ln2);
    bt.f1 = detail::affine(bt.bnorm, blk.w1, blk.b1);
    bt.relu = bt.f1.cwiseMax(0.0);
    x = bt.h1 + detail::affine(bt.relu, blk.w2, blk.b2);
  }

  t.x_last = x;
  t.y = detail::layer_norm(x, p.final_ln_g, p.final_ln_b, t.final_ln);
  return t.y;
}

/// Sequence representation: the hidden state at the most recent position.
inline VectorXd encode_sequence(const ModelParams& p, const EncoderConfig& cfg, const std::vector<int>& items,
                                const EmbeddingEnhancer* enhancer = nullptr, bool train_mode = false,
                                Rng* dropout_rng = nullptr, EncodeTape* tape = nullptr) {
  MatrixXd y = encode_all(p, cfg, items, enhancer, train_mode, dropout_rng, tape);
  return y.row(y.rows() - 1).transpose();
}

/// Exact reverse pass. d_y has one row per (kept) position; gradients
/// accumulate into `grads` (same shapes as the parameters). The cached
/// context vectors of enhanced items are constants: their input gradient is
/// routed to the item generator and, scaled by gamma, to the embedding row.
inline void encode_backward(const ModelParams& p, const EncoderConfig& cfg, const EncodeTape& t, const MatrixXd& d_y,
                            ModelParams& grads) {
  const Eigen::Index n = static_cast<Eigen::Index>(t.items.size());
  const Eigen::Index d = cfg.d;
  const Eigen::Index dh = d / cfg.n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  MatrixXd dx = detail::layer_norm_bwd(d_y, p.final_ln_g, t.final_ln, grads.final_ln_g, grads.final_ln_b);

  for (std::size_t bi = p.blocks.size(); bi-- > 0;) {
    const AttnBlock& blk = p.blocks[bi];
    AttnBlock& g = grads.blocks[bi];
    const BlockTape& bt = t.blocks[bi];

    // x_out = h1 + relu(bnorm W1 + b1) W2 + b2
    MatrixXd dh1 = dx;
    g.w2 += bt.relu.transpose() * dx;
    g.b2.col(0) += dx.colwise().sum().transpose();
    MatrixXd drelu = dx * blk.w2.transpose();
    MatrixXd df1 = drelu.cwiseProduct((bt.f1.array() > 0.0).cast<double>().matrix());
    g.w1 += bt.bnorm.transpose() * df1;
    g.b1.col(0) += df1.colwise().sum().transpose();
    MatrixXd dbnorm = df1 * blk.w1.transpose();
    dh1 += detail::layer_norm_bwd(dbnorm, blk.ln2_g, bt.ln2, g.ln2_g, g.ln2_b);

    // h1 = x_in + dropout(concat Wo + bo)
    MatrixXd do_ = bt.attn_drop.size() > 0 ? dh1.cwiseProduct(bt.attn_drop) : dh1;
    MatrixXd dx_in = dh1;
    g.wo += bt.concat.transpose() * do_;
    g.bo.col(0) += do_.colwise().sum().transpose();
    MatrixXd dconcat = do_ * blk.wo.transpose();

    MatrixXd dq = MatrixXd::Zero(n, d), dk = MatrixXd::Zero(n, d), dv = MatrixXd::Zero(n, d);
    for (int h = 0; h < cfg.n_heads; ++h) {
      const MatrixXd& a = bt.attn[static_cast<std::size_t>(h)];
      auto kh = bt.k.middleCols(h * dh, dh);
      auto vh = bt.v.middleCols(h * dh, dh);
      auto qh = bt.q.middleCols(h * dh, dh);
      MatrixXd doh = dconcat.middleCols(h * dh, dh);
      MatrixXd da = doh * vh.transpose();
      dv.middleCols(h * dh, dh) = a.transpose() * doh;
      MatrixXd ds = detail::softmax_bwd(a, da);
      dq.middleCols(h * dh, dh) = scale * (ds * kh);
      dk.middleCols(h * dh, dh) = scale * (ds.transpose() * qh);
    }

    g.wq += bt.a.transpose() * dq;
    g.bq.col(0) += dq.colwise().sum().transpose();
    g.wk += bt.a.transpose() * dk;
    g.bk.col(0) += dk.colwise().sum().transpose();
    g.wv += bt.a.transpose() * dv;
    g.bv.col(0) += dv.colwise().sum().transpose();
    MatrixXd da_total = dq * blk.wq.transpose() + dk * blk.wk.transpose() + dv * blk.wv.transpose();
    dx_in += detail::layer_norm_bwd(da_total, blk.ln1_g, bt.ln1, g.ln1_g, g.ln1_b);
    dx = dx_in;
  }

  if (t.emb_drop.size() > 0) dx = dx.cwiseProduct(t.emb_drop);
  grads.pos_emb.topRows(n) += dx;
  for (Eigen::Index pos = 0; pos < n; ++pos) {
    const int item = t.items[static_cast<std::size_t>(pos)];
    const VectorXd* ctx = t.ctx_used[static_cast<std::size_t>(pos)];
    if (ctx != nullptr) {
      grads.item_gen_w += dx.row(pos).transpose() * ctx->transpose();
      grads.item_gen_b.col(0) += dx.row(pos).transpose();
      grads.item_emb.row(item) += t.gamma * dx.row(pos);
    } else {
      grads.item_emb.row(item) += dx.row(pos);
    }
  }
}

}  // namespace tailseq
