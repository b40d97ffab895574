#pragma once

#include <vector>

#include "tailseq/data.hpp"
#include "tailseq/rng.hpp"

namespace tailseq {

struct Subsequence {
  int owner = 0;           // dense user id of the sequence it came from
  std::vector<int> items;  // last element is always the key item
};

/// Key-value dictionary from item to the training subsequences that end with
/// it: forward prefixes always, reversed suffixes when include_reversed.
struct SubsequenceIndex {
  std::vector<std::vector<Subsequence>> entries;  // dense item id -> C_i
  bool include_reversed = true;
  int max_len = 50;

  const std::vector<Subsequence>& at(int item) const { return entries[static_cast<std::size_t>(item)]; }
  int size_of(int item) const { return static_cast<int>(entries[static_cast<std::size_t>(item)].size()); }
};

/// Builds C_i from train sequences only. Entries longer than max_len keep
/// the max_len elements nearest the key item. Per key item, subsequences are
/// appended user by user: all forward prefixes first (position ascending),
/// then all reversed suffixes.
inline SubsequenceIndex build_subsequence_index(const SplitDataset& split, bool include_reversed, int max_len = 50) {
  if (max_len < 1) throw ConfigError("build_subsequence_index: max_len must be >= 1");
  SubsequenceIndex index;
  index.include_reversed = include_reversed;
  index.max_len = max_len;
  index.entries.resize(static_cast<std::size_t>(split.n_items));

  auto push = [&](int key, int owner, std::vector<int> sub) {
    if (sub.size() > static_cast<std::size_t>(max_len))
      sub.erase(sub.begin(), sub.end() - max_len);
    index.entries[static_cast<std::size_t>(key)].push_back({owner, std::move(sub)});
  };

  for (int u = 0; u < split.n_users(); ++u) {
    const auto& seq = split.train[static_cast<std::size_t>(u)];
    for (std::size_t t = 0; t < seq.size(); ++t)
      push(seq[t], u, std::vector<int>(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(t) + 1));
    if (include_reversed) {
      for (std::size_t t = 0; t < seq.size(); ++t)
        push(seq[t], u, std::vector<int>(seq.rbegin(), seq.rbegin() + static_cast<std::ptrdiff_t>(seq.size() - t)));
    }
  }
  return index;
}

/// K distinct subsequences of C_item, uniform without replacement.
inline std::vector<Subsequence> sample_subsequences(const SubsequenceIndex& index, int item, int k, Rng& rng) {
  const auto& pool = index.at(item);
  if (k < 1 || static_cast<std::size_t>(k) > pool.size())
    throw DataError("sample_subsequences: K = " + std::to_string(k) + " out of range for |C_i| = " +
                    std::to_string(pool.size()));
  std::vector<Subsequence> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int idx : rng.sample_indices(static_cast<int>(pool.size()), k))
    out.push_back(pool[static_cast<std::size_t>(idx)]);
  return out;
}

/// Deterministic evenly-strided subset of [0, n), used to cap per-item
/// context sets without consuming any random stream.
inline std::vector<int> strided_subset(int n, int cap) {
  std::vector<int> idx;
  if (n <= cap) {
    idx.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    return idx;
  }
  idx.reserve(static_cast<std::size_t>(cap));
  for (int j = 0; j < cap; ++j)
    idx.push_back(static_cast<int>((static_cast<std::int64_t>(j) * n) / cap));
  return idx;
}

}  // namespace tailseq
