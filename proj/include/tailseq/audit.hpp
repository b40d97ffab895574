#pragma once

#include <string>
#include <vector>

#include "tailseq/partition.hpp"
#include "tailseq/subseq.hpp"

namespace tailseq {

struct HygieneAudit {
  bool ok = true;
  std::vector<std::string> problems;

  void fail(std::string msg) {
    ok = false;
    problems.push_back(std::move(msg));
  }
};

/// Confirms that no validation/test interaction leaked into the training
/// artifacts: the partition (popularity counts, thresholds, curriculum
/// bounds) and the subsequence index must equal what a rebuild from the
/// train sequences alone produces, and every stored subsequence must be
/// derivable from its owner's train sequence.
inline HygieneAudit audit_split_hygiene(const SplitDataset& split, const HeadTailPartition& part,
                                        const SubsequenceIndex& index) {
  HygieneAudit audit;

  HeadTailPartition rebuilt_part = partition_head_tail(split, part.alpha, &index);
  if (rebuilt_part.user_is_head != part.user_is_head) audit.fail("user head/tail membership not train-derived");
  if (rebuilt_part.item_is_head != part.item_is_head) audit.fail("item head/tail membership not train-derived");
  if (rebuilt_part.kappa_u != part.kappa_u || rebuilt_part.kappa_i != part.kappa_i)
    audit.fail("kappa thresholds not train-derived");
  if (rebuilt_part.l_min_user != part.l_min_user || rebuilt_part.l_max_user != part.l_max_user ||
      rebuilt_part.l_min_item != part.l_min_item || rebuilt_part.l_max_item != part.l_max_item)
    audit.fail("curriculum bounds not train-derived");

  SubsequenceIndex rebuilt_index = build_subsequence_index(split, index.include_reversed, index.max_len);
  if (rebuilt_index.entries.size() != index.entries.size()) {
    audit.fail("index has wrong item count");
    return audit;
  }
  for (std::size_t item = 0; item < index.entries.size(); ++item) {
    const auto& got = index.entries[item];
    const auto& want = rebuilt_index.entries[item];
    if (got.size() != want.size()) {
      audit.fail("index entry size differs for item " + std::to_string(item));
      continue;
    }
    for (std::size_t s = 0; s < got.size(); ++s) {
      if (got[s].owner != want[s].owner || got[s].items != want[s].items) {
        audit.fail("index entry differs for item " + std::to_string(item));
        break;
      }
    }
  }

  for (std::size_t item = 0; item < index.entries.size(); ++item) {
    for (const auto& sub : index.entries[item]) {
      if (sub.items.empty() || sub.items.back() != static_cast<int>(item)) {
        audit.fail("subsequence for item " + std::to_string(item) + " does not end at its key item");
        break;
      }
    }
  }
  return audit;
}

}  // namespace tailseq
