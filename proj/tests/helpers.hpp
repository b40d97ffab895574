#pragma once

#include <vector>

#include "tailseq/data.hpp"
#include "tailseq/rng.hpp"

namespace testutil {

/// Leave-one-out over explicit full sequences (bypasses parsing/filtering).
inline tailseq::SplitDataset split_from(const std::vector<std::vector<int>>& full_sequences, int n_items) {
  std::vector<tailseq::UserSequence> seqs;
  for (std::size_t u = 0; u < full_sequences.size(); ++u)
    seqs.push_back({static_cast<int>(u), full_sequences[u]});
  return tailseq::leave_one_out_split(seqs, n_items);
}

/// Random full sequences without immediate repetition, lengths in
/// [min_len, max_len].
inline std::vector<std::vector<int>> random_sequences(int n_users, int n_items, int min_len, int max_len,
                                                      std::uint64_t seed) {
  std::vector<std::vector<int>> seqs(static_cast<std::size_t>(n_users));
  tailseq::Rng rng(seed);
  for (auto& seq : seqs) {
    const int len = rng.range(min_len, max_len);
    for (int t = 0; t < len; ++t) {
      int item = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_items)));
      while (!seq.empty() && item == seq.back() && n_items > 1)
        item = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_items)));
      seq.push_back(item);
    }
  }
  return seqs;
}

}  // namespace testutil
