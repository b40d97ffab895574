#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "tailseq/params.hpp"

namespace testutil {

struct FdResult {
  double max_rel_err = 0.0;
  std::string worst_block;
};

/// Central finite differences over every coordinate of every tensor,
/// compared against the supplied analytic gradients. The loss closure sees
/// the perturbed parameters through the reference it captured.
inline FdResult fd_compare(tailseq::ModelParams& params, const tailseq::ModelParams& analytic,
                           const std::function<double()>& loss, double step = 1e-4) {
  FdResult result;
  auto views = tailseq::tensor_views(params);
  auto grad_views = tailseq::tensor_views(const_cast<tailseq::ModelParams&>(analytic));
  for (std::size_t t = 0; t < views.size(); ++t) {
    tailseq::MatrixXd& m = *views[t].second;
    const tailseq::MatrixXd& g = *grad_views[t].second;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const double orig = m(r, c);
        m(r, c) = orig + step;
        const double up = loss();
        m(r, c) = orig - step;
        const double down = loss();
        m(r, c) = orig;
        const double fd = (up - down) / (2.0 * step);
        const double an = g(r, c);
        const double rel = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
        if (rel > result.max_rel_err) {
          result.max_rel_err = rel;
          result.worst_block = views[t].first;
        }
      }
    }
  }
  return result;
}

}  // namespace testutil
