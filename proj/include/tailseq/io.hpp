#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tailseq/data.hpp"
#include "tailseq/evaluate.hpp"
#include "tailseq/partition.hpp"
#include "tailseq/subseq.hpp"

namespace tailseq {

using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

/// Everything cmd_prepare produces, round-trippable through workdir/data/.
struct PreparedData {
  std::vector<std::string> users;  // dense user id -> raw key
  std::vector<std::string> items;  // dense item id -> raw key
  SplitDataset split;
  SubsequenceIndex index;
  HeadTailPartition partition;
};

namespace detail {

inline ordered_json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("invalid JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

inline void write_json_file(const fs::path& path, const ordered_json& j, int indent = 2) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << j.dump(indent) << '\n';
}

inline std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// prepared-data artifacts (plain JSON, one concern per file)

inline void save_prepared(const PreparedData& data, const fs::path& dir) {
  fs::create_directories(dir);
  detail::write_json_file(dir / "users.json", ordered_json(data.users), -1);
  detail::write_json_file(dir / "items.json", ordered_json(data.items), -1);
  detail::write_json_file(dir / "train.json", ordered_json(data.split.train), -1);
  detail::write_json_file(dir / "valid.json", ordered_json(data.split.valid), -1);
  detail::write_json_file(dir / "test.json", ordered_json(data.split.test), -1);

  ordered_json part;
  part["alpha"] = data.partition.alpha;
  part["kappa_u"] = data.partition.kappa_u;
  part["kappa_i"] = data.partition.kappa_i;
  part["l_min_user"] = data.partition.l_min_user;
  part["l_max_user"] = data.partition.l_max_user;
  part["l_min_item"] = data.partition.l_min_item;
  part["l_max_item"] = data.partition.l_max_item;
  part["user_is_head"] = data.partition.user_is_head;
  part["item_is_head"] = data.partition.item_is_head;
  detail::write_json_file(dir / "partition.json", part);

  ordered_json index;
  index["include_reversed"] = data.index.include_reversed;
  index["max_len"] = data.index.max_len;
  ordered_json entries = ordered_json::array();
  for (const auto& pool : data.index.entries) {
    ordered_json per_item = ordered_json::array();
    for (const auto& sub : pool) per_item.push_back(ordered_json{{"u", sub.owner}, {"s", sub.items}});
    entries.push_back(std::move(per_item));
  }
  index["entries"] = std::move(entries);
  detail::write_json_file(dir / "index.json", index, -1);
}

inline PreparedData load_prepared(const fs::path& dir) {
  if (!fs::exists(dir / "train.json"))
    throw DataError("workdir has no prepared data under " + dir.string() + " (run prepare first)");
  PreparedData data;
  data.users = detail::read_json_file(dir / "users.json").get<std::vector<std::string>>();
  data.items = detail::read_json_file(dir / "items.json").get<std::vector<std::string>>();
  data.split.train = detail::read_json_file(dir / "train.json").get<std::vector<std::vector<int>>>();
  data.split.valid = detail::read_json_file(dir / "valid.json").get<std::vector<int>>();
  data.split.test = detail::read_json_file(dir / "test.json").get<std::vector<int>>();
  data.split.n_items = static_cast<int>(data.items.size());

  ordered_json part = detail::read_json_file(dir / "partition.json");
  data.partition.alpha = part.at("alpha").get<double>();
  data.partition.kappa_u = part.at("kappa_u").get<int>();
  data.partition.kappa_i = part.at("kappa_i").get<int>();
  data.partition.l_min_user = part.at("l_min_user").get<int>();
  data.partition.l_max_user = part.at("l_max_user").get<int>();
  data.partition.l_min_item = part.at("l_min_item").get<int>();
  data.partition.l_max_item = part.at("l_max_item").get<int>();
  data.partition.user_is_head = part.at("user_is_head").get<std::vector<std::uint8_t>>();
  data.partition.item_is_head = part.at("item_is_head").get<std::vector<std::uint8_t>>();

  ordered_json index = detail::read_json_file(dir / "index.json");
  data.index.include_reversed = index.at("include_reversed").get<bool>();
  data.index.max_len = index.at("max_len").get<int>();
  for (const auto& per_item : index.at("entries")) {
    std::vector<Subsequence> pool;
    pool.reserve(per_item.size());
    for (const auto& sub : per_item)
      pool.push_back({sub.at("u").get<int>(), sub.at("s").get<std::vector<int>>()});
    data.index.entries.push_back(std::move(pool));
  }
  if (data.index.entries.size() != data.items.size()) throw DataError("index.json does not match items.json");
  return data;
}

/// Tab-separated interaction triples, one per line.
inline void write_interactions_tsv(const InteractionLog& log, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  for (const auto& it : log.interactions) out << it.user << '\t' << it.item << '\t' << it.timestamp << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// evaluation reports

namespace detail {
inline ordered_json group_json(const GroupStat& g) {
  if (!g.present()) return nullptr;
  return ordered_json{{"hr", g.hr}, {"ndcg", g.ndcg}, {"n", g.n}};
}
}  // namespace detail

inline ordered_json report_to_json(const MetricsReport& r, const PreparedData& data, const std::string& target,
                                   std::uint64_t seed, int n_negatives, const std::string& checkpoint) {
  ordered_json j;
  j["target"] = target;
  j["seed"] = seed;
  j["k"] = r.k;
  j["n_negatives"] = n_negatives;
  j["checkpoint"] = checkpoint;
  j["tail_without_context"] = r.tail_without_context;

  ordered_json agg;
  agg["overall"] = detail::group_json(r.overall);
  agg["head_user"] = detail::group_json(r.head_user);
  agg["tail_user"] = detail::group_json(r.tail_user);
  agg["head_item"] = detail::group_json(r.head_item);
  agg["tail_item"] = detail::group_json(r.tail_item);
  agg["mean"] = r.mean_present ? ordered_json{{"hr", r.mean_hr}, {"ndcg", r.mean_ndcg}} : ordered_json(nullptr);
  ordered_json cells;
  cells["HH"] = detail::group_json(r.hh);
  cells["HT"] = detail::group_json(r.ht);
  cells["TH"] = detail::group_json(r.th);
  cells["TT"] = detail::group_json(r.tt);
  agg["cells"] = std::move(cells);
  j["aggregates"] = std::move(agg);

  ordered_json records = ordered_json::array();
  for (const auto& rec : r.records) {
    records.push_back(ordered_json{{"user", rec.user},
                                   {"user_key", data.users[static_cast<std::size_t>(rec.user)]},
                                   {"item", rec.gt_item},
                                   {"item_key", data.items[static_cast<std::size_t>(rec.gt_item)]},
                                   {"rank", rec.rank},
                                   {"hit", rec.hit},
                                   {"ndcg", rec.ndcg},
                                   {"user_group", rec.user_head ? "head" : "tail"},
                                   {"item_group", rec.item_head ? "head" : "tail"}});
  }
  j["records"] = std::move(records);
  return j;
}

/// Summary table: one row per group, HR@k and NDCG@k columns. Absent groups
/// leave their cells empty.
inline void write_summary_csv(const MetricsReport& r, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  const std::string k = std::to_string(r.k);
  out << "group,hr@" << k << ",ndcg@" << k << ",n\n";
  auto row = [&](const char* name, const GroupStat& g) {
    out << name << ',';
    if (g.present())
      out << detail::fmt6(g.hr) << ',' << detail::fmt6(g.ndcg) << ',' << g.n;
    else
      out << ",,";
    out << '\n';
  };
  row("overall", r.overall);
  row("head_user", r.head_user);
  row("tail_user", r.tail_user);
  row("head_item", r.head_item);
  row("tail_item", r.tail_item);
  out << "mean,";
  if (r.mean_present)
    out << detail::fmt6(r.mean_hr) << ',' << detail::fmt6(r.mean_ndcg) << ',';
  else
    out << ",,";
  out << '\n';
}

/// Fine-grained cells: users crossed with their ground-truth item's group.
inline void write_cells_csv(const MetricsReport& r, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << "cell,hr@" << r.k << ",n\n";
  auto row = [&](const char* name, const GroupStat& g) {
    out << name << ',';
    if (g.present())
      out << detail::fmt6(g.hr) << ',' << g.n;
    else
      out << ',';
    out << '\n';
  };
  row("HH", r.hh);
  row("HT", r.ht);
  row("TH", r.th);
  row("TT", r.tt);
  out << "mean,";
  if (r.hh.present() && r.ht.present() && r.th.present() && r.tt.present())
    out << detail::fmt6((r.hh.hr + r.ht.hr + r.th.hr + r.tt.hr) / 4.0) << ',';
  else
    out << ',';
  out << '\n';
}

}  // namespace tailseq
