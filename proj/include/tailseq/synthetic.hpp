#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tailseq/data.hpp"
#include "tailseq/rng.hpp"

namespace tailseq {

/// Desk-scale long-tailed dataset: user activity follows a heavy-tailed
/// length distribution, item popularity follows a Zipf law.
struct SyntheticConfig {
  int n_users = 2000;
  int n_items = 500;
  double zipf_exponent = 1.2;
  double user_activity_exponent = 2.0;
  int min_seq_len = 5;
  double mean_seq_len = 15.0;
  std::uint64_t seed = 13;

  void validate() const {
    if (n_users < 1 || n_items < 1) throw ConfigError("synthetic: counts must be positive");
    if (!(zipf_exponent > 0.0)) throw ConfigError("synthetic: zipf_exponent must be > 0");
    if (!(user_activity_exponent > 0.0)) throw ConfigError("synthetic: user_activity_exponent must be > 0");
    if (min_seq_len < 5) throw ConfigError("synthetic: min_seq_len must be >= 5");
    if (min_seq_len > n_items) throw ConfigError("synthetic: min_seq_len > n_items is infeasible");
    if (mean_seq_len < min_seq_len) throw ConfigError("synthetic: mean_seq_len must be >= min_seq_len");
  }
};

namespace detail {
// Inverse-CDF sampler over ranks 0..n-1, p(rank) proportional to (rank+1)^-s.
class ZipfSampler {
 public:
  ZipfSampler(int n, double s) : cdf_(static_cast<std::size_t>(n)) {
    double total = 0.0;
    for (int r = 0; r < n; ++r) {
      total += std::pow(static_cast<double>(r + 1), -s);
      cdf_[static_cast<std::size_t>(r)] = total;
    }
    for (auto& c : cdf_) c /= total;
    cdf_.back() = 1.0;
  }
  int draw(Rng& rng) const {
    double u = rng.uniform();
    auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) --it;
    return static_cast<int>(it - cdf_.begin());
  }

 private:
  std::vector<double> cdf_;
};

// Pareto offset scaled so the pre-clamp mean is roughly mean_seq_len.
inline int draw_length(const SyntheticConfig& cfg, Rng& rng) {
  const double a = cfg.user_activity_exponent;
  double u = rng.uniform();
  while (u == 0.0) u = rng.uniform();
  const double z = std::pow(u, -1.0 / a);  // Pareto(1, a)
  const double scale = (cfg.mean_seq_len - cfg.min_seq_len) * (a > 1.0 ? (a - 1.0) : 1.0);
  const double raw = cfg.min_seq_len + scale * (z - 1.0);
  const int len = static_cast<int>(std::floor(raw));
  return std::clamp(len, cfg.min_seq_len, cfg.n_items);
}
}  // namespace detail

/// Generates a log that survives core_filter(5) unchanged: every user draws
/// at least min_seq_len events, and items that land below five occurrences
/// get topped up with extra trailing events.
inline InteractionLog generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  detail::ZipfSampler zipf(cfg.n_items, cfg.zipf_exponent);

  std::vector<std::vector<int>> seqs(static_cast<std::size_t>(cfg.n_users));
  for (int u = 0; u < cfg.n_users; ++u) {
    Rng len_rng = derive_rng(cfg.seed, Stream::synth_lengths, static_cast<std::uint64_t>(u));
    Rng item_rng = derive_rng(cfg.seed, Stream::synth_items, static_cast<std::uint64_t>(u));
    const int len = detail::draw_length(cfg, len_rng);
    auto& seq = seqs[static_cast<std::size_t>(u)];
    seq.reserve(static_cast<std::size_t>(len));
    for (int t = 0; t < len; ++t) {
      int item = zipf.draw(item_rng);
      while (!seq.empty() && item == seq.back()) item = zipf.draw(item_rng);
      seq.push_back(item);
    }
  }

  // Top up items seen fewer than 5 times so core filtering is a no-op.
  std::vector<int> counts(static_cast<std::size_t>(cfg.n_items), 0);
  for (const auto& seq : seqs)
    for (int item : seq) ++counts[static_cast<std::size_t>(item)];
  for (int item = 0; item < cfg.n_items; ++item) {
    int need = counts[static_cast<std::size_t>(item)];
    if (need == 0 || need >= 5) continue;
    for (int u = 0; u < cfg.n_users && need < 5; ++u) {
      auto& seq = seqs[static_cast<std::size_t>(u)];
      if (seq.back() == item) continue;
      seq.push_back(item);
      ++need;
    }
  }

  InteractionLog log;
  for (int u = 0; u < cfg.n_users; ++u) {
    const auto& seq = seqs[static_cast<std::size_t>(u)];
    for (std::size_t t = 0; t < seq.size(); ++t)
      log.interactions.push_back(
          {"u" + std::to_string(u), "i" + std::to_string(seq[t]), static_cast<std::int64_t>(t)});
  }
  log.reindex();
  return log;
}

}  // namespace tailseq
