#pragma once

#include <cmath>
#include <cstdint>

#include "tailseq/params.hpp"

namespace tailseq {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ModelParams m;
  ModelParams v;
  std::int64_t t = 0;

  static AdamState init(const ModelParams& p) { return AdamState{zeros_like(p), zeros_like(p), 0}; }
};

/// One bias-corrected adaptive moment update. Throws a numeric error naming
/// the offending tensor on non-finite gradients or updates.
inline void optimizer_step(ModelParams& params, const ModelParams& grads, AdamState& state, const AdamConfig& cfg) {
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));

  auto pv = tensor_views(params);
  auto gv = tensor_views(const_cast<ModelParams&>(grads));
  auto mv = tensor_views(state.m);
  auto vv = tensor_views(state.v);
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const MatrixXd& g = *gv[i].second;
    if (!g.allFinite()) throw NumericError("non-finite gradient in parameter block " + pv[i].first);
    MatrixXd& m = *mv[i].second;
    MatrixXd& v = *vv[i].second;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    MatrixXd update =
        (cfg.learning_rate / bc1) * m.cwiseQuotient(((v / bc2).cwiseSqrt().array() + cfg.eps).matrix());
    if (!update.allFinite()) throw NumericError("non-finite update in parameter block " + pv[i].first);
    *pv[i].second -= update;
  }
}

}  // namespace tailseq
