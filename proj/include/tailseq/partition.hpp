#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "tailseq/data.hpp"
#include "tailseq/subseq.hpp"

namespace tailseq {

/// Head/tail membership for users and items, plus the thresholds the
/// branches sample against and the curriculum length bounds.
struct HeadTailPartition {
  std::vector<std::uint8_t> user_is_head;  // by dense user id
  std::vector<std::uint8_t> item_is_head;  // by dense item id
  double alpha = 0.2;
  int kappa_u = 0;  // min train-sequence length among head users
  int kappa_i = 0;  // min training popularity among head items
  int l_min_user = 0, l_max_user = 0;  // train length bounds over head users
  int l_min_item = 0, l_max_item = 0;  // |C_i| bounds over head items

  bool head_user(int u) const { return user_is_head[static_cast<std::size_t>(u)] != 0; }
  bool head_item(int i) const { return item_is_head[static_cast<std::size_t>(i)] != 0; }

  std::vector<int> head_users() const {
    std::vector<int> out;
    for (int u = 0; u < static_cast<int>(user_is_head.size()); ++u)
      if (head_user(u)) out.push_back(u);
    return out;
  }
  std::vector<int> head_items() const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(item_is_head.size()); ++i)
      if (head_item(i)) out.push_back(i);
    return out;
  }
};

namespace detail {
// Sort by score descending, id ascending; mark the first ceil(alpha*n).
inline std::vector<std::uint8_t> top_fraction(const std::vector<int>& scores, double alpha) {
  const int n = static_cast<int>(scores.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    int sa = scores[static_cast<std::size_t>(a)], sb = scores[static_cast<std::size_t>(b)];
    return sa != sb ? sa > sb : a < b;
  });
  const int n_head = static_cast<int>(std::ceil(alpha * n));
  std::vector<std::uint8_t> is_head(static_cast<std::size_t>(n), 0);
  for (int k = 0; k < n_head && k < n; ++k) is_head[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = 1;
  return is_head;
}

inline void bounds_over_head(const std::vector<int>& scores, const std::vector<std::uint8_t>& is_head, int& lo,
                             int& hi) {
  bool any = false;
  lo = 0;
  hi = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!is_head[i]) continue;
    if (!any || scores[i] < lo) lo = scores[i];
    if (!any || scores[i] > hi) hi = scores[i];
    any = true;
  }
}
}  // namespace detail

/// Top ceil(alpha*|U|) users by train-sequence length are head users; top
/// ceil(alpha*|I|) items by training popularity are head items. Ties break
/// by dense id ascending. Item curriculum bounds use |C_i| when an index is
/// supplied, otherwise the popularity counts (equal to forward-only |C_i|).
inline HeadTailPartition partition_head_tail(const SplitDataset& split, double alpha,
                                             const SubsequenceIndex* index = nullptr) {
  if (!(alpha > 0.0) || alpha > 1.0) throw ConfigError("partition_head_tail: alpha must be in (0, 1]");

  HeadTailPartition part;
  part.alpha = alpha;

  std::vector<int> lengths(static_cast<std::size_t>(split.n_users()));
  for (int u = 0; u < split.n_users(); ++u)
    lengths[static_cast<std::size_t>(u)] = static_cast<int>(split.train[static_cast<std::size_t>(u)].size());
  std::vector<int> popularity = train_popularity(split);

  part.user_is_head = detail::top_fraction(lengths, alpha);
  part.item_is_head = detail::top_fraction(popularity, alpha);

  detail::bounds_over_head(lengths, part.user_is_head, part.l_min_user, part.l_max_user);
  part.kappa_u = part.l_min_user;

  int pop_lo = 0, pop_hi = 0;
  detail::bounds_over_head(popularity, part.item_is_head, pop_lo, pop_hi);
  part.kappa_i = pop_lo;

  if (index != nullptr) {
    std::vector<int> sizes(static_cast<std::size_t>(split.n_items));
    for (int i = 0; i < split.n_items; ++i) sizes[static_cast<std::size_t>(i)] = index->size_of(i);
    detail::bounds_over_head(sizes, part.item_is_head, part.l_min_item, part.l_max_item);
  } else {
    part.l_min_item = pop_lo;
    part.l_max_item = pop_hi;
  }
  return part;
}

}  // namespace tailseq
