#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tailseq/errors.hpp"

namespace tailseq {

/// One (user, item, timestamp) triple as read from the input file.
struct Interaction {
  std::string user;
  std::string item;
  std::int64_t timestamp = 0;
};

/// Interaction multiset plus dense id assignment. Dense ids are contiguous
/// from 0 in first-appearance order over the current interaction list.
struct InteractionLog {
  std::vector<Interaction> interactions;
  std::vector<std::string> users;  // dense user id -> raw key
  std::vector<std::string> items;  // dense item id -> raw key
  std::map<std::string, int> user_index;
  std::map<std::string, int> item_index;

  int n_users() const { return static_cast<int>(users.size()); }
  int n_items() const { return static_cast<int>(items.size()); }

  void reindex() {
    users.clear();
    items.clear();
    user_index.clear();
    item_index.clear();
    for (const auto& it : interactions) {
      if (user_index.emplace(it.user, n_users()).second) users.push_back(it.user);
      if (item_index.emplace(it.item, n_items()).second) items.push_back(it.item);
    }
  }
};

/// A user's item consumption ordered by timestamp (ties by dense item id).
struct UserSequence {
  int user = 0;
  std::vector<int> items;
};

/// Leave-one-out split: per user, all but the last two items train, the
/// second-to-last validates, the last tests.
struct SplitDataset {
  std::vector<std::vector<int>> train;  // dense user id -> train items
  std::vector<int> valid;               // dense user id -> validation target
  std::vector<int> test;                // dense user id -> test target
  int n_items = 0;

  int n_users() const { return static_cast<int>(train.size()); }
};

// ---------------------------------------------------------------------------
// parsing

inline InteractionLog parse_interactions(std::istream& in) {
  InteractionLog log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::string_view rest(line);
    std::string_view fields[3];
    int n_fields = 0;
    while (true) {
      std::size_t tab = rest.find('\t');
      std::string_view field = rest.substr(0, tab);
      if (n_fields < 3) fields[n_fields] = field;
      ++n_fields;
      if (tab == std::string_view::npos) break;
      rest.remove_prefix(tab + 1);
    }
    if (n_fields != 3)
      throw DataError("parse error at line " + std::to_string(line_no) + ": expected 3 tab-separated fields, got " +
                      std::to_string(n_fields));

    std::int64_t ts = 0;
    const char* first = fields[2].data();
    const char* last = first + fields[2].size();
    auto [ptr, ec] = std::from_chars(first, last, ts);
    if (ec != std::errc() || ptr != last)
      throw DataError("parse error at line " + std::to_string(line_no) + ": timestamp is not a decimal integer");
    if (ts < 0)
      throw DataError("parse error at line " + std::to_string(line_no) + ": negative timestamp");
    if (fields[0].empty() || fields[1].empty())
      throw DataError("parse error at line " + std::to_string(line_no) + ": empty user or item id");

    log.interactions.push_back({std::string(fields[0]), std::string(fields[1]), ts});
  }
  log.reindex();
  return log;
}

// ---------------------------------------------------------------------------
// core filtering

/// Drops users and items with fewer than min_count interactions. When
/// iterate is true, passes repeat until a fixed point (removing a user can
/// push an item below the threshold and vice versa). Dense ids are
/// reassigned over the survivors.
inline InteractionLog core_filter(const InteractionLog& log, int min_count = 5, bool iterate = true) {
  if (min_count < 1) throw ConfigError("core_filter: min_count must be >= 1");
  InteractionLog out;
  out.interactions = log.interactions;
  while (true) {
    std::map<std::string, int> user_count, item_count;
    for (const auto& it : out.interactions) {
      ++user_count[it.user];
      ++item_count[it.item];
    }
    std::vector<Interaction> kept;
    kept.reserve(out.interactions.size());
    for (const auto& it : out.interactions) {
      if (user_count[it.user] >= min_count && item_count[it.item] >= min_count) kept.push_back(it);
    }
    bool changed = kept.size() != out.interactions.size();
    out.interactions = std::move(kept);
    if (!changed || !iterate) break;
  }
  out.reindex();
  return out;
}

// ---------------------------------------------------------------------------
// sequences and splitting

inline std::vector<UserSequence> build_sequences(const InteractionLog& log) {
  struct Event {
    std::int64_t ts;
    int item;
  };
  std::vector<std::vector<Event>> per_user(static_cast<std::size_t>(log.n_users()));
  for (const auto& it : log.interactions) {
    int u = log.user_index.at(it.user);
    int i = log.item_index.at(it.item);
    per_user[static_cast<std::size_t>(u)].push_back({it.timestamp, i});
  }
  std::vector<UserSequence> seqs(static_cast<std::size_t>(log.n_users()));
  for (int u = 0; u < log.n_users(); ++u) {
    auto& events = per_user[static_cast<std::size_t>(u)];
    std::stable_sort(events.begin(), events.end(),
                     [](const Event& a, const Event& b) { return a.ts != b.ts ? a.ts < b.ts : a.item < b.item; });
    seqs[static_cast<std::size_t>(u)].user = u;
    for (const auto& e : events) seqs[static_cast<std::size_t>(u)].items.push_back(e.item);
  }
  return seqs;
}

inline SplitDataset leave_one_out_split(const std::vector<UserSequence>& sequences, int n_items) {
  SplitDataset split;
  split.n_items = n_items;
  split.train.resize(sequences.size());
  split.valid.resize(sequences.size());
  split.test.resize(sequences.size());
  for (const auto& seq : sequences) {
    if (seq.items.size() < 3)
      throw DataError("split error: user " + std::to_string(seq.user) + " has fewer than 3 interactions");
    auto u = static_cast<std::size_t>(seq.user);
    split.train[u].assign(seq.items.begin(), seq.items.end() - 2);
    split.valid[u] = seq.items[seq.items.size() - 2];
    split.test[u] = seq.items.back();
  }
  return split;
}

/// Last R items of a sequence, in order.
inline std::vector<int> truncate_recent(const std::vector<int>& items, int r) {
  if (r < 1 || static_cast<std::size_t>(r) > items.size())
    throw DataError("truncate_recent: R = " + std::to_string(r) + " out of range for sequence of length " +
                    std::to_string(items.size()));
  return std::vector<int>(items.end() - r, items.end());
}

/// Training popularity: occurrences of each item across train sequences.
inline std::vector<int> train_popularity(const SplitDataset& split) {
  std::vector<int> counts(static_cast<std::size_t>(split.n_items), 0);
  for (const auto& seq : split.train)
    for (int item : seq) ++counts[static_cast<std::size_t>(item)];
  return counts;
}

}  // namespace tailseq
