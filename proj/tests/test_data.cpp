#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "tailseq/audit.hpp"
#include "tailseq/data.hpp"
#include "tailseq/partition.hpp"
#include "tailseq/subseq.hpp"
#include "tailseq/synthetic.hpp"

using namespace tailseq;

namespace {

InteractionLog log_from_triples(const std::vector<std::tuple<std::string, std::string, std::int64_t>>& triples) {
  InteractionLog log;
  for (const auto& [u, i, t] : triples) log.interactions.push_back({u, i, t});
  log.reindex();
  return log;
}

// Independent single-pass-until-stable filter used as the fixed-point oracle.
InteractionLog oracle_filter(InteractionLog log, int min_count) {
  while (true) {
    std::map<std::string, int> uc, ic;
    for (const auto& it : log.interactions) {
      ++uc[it.user];
      ++ic[it.item];
    }
    std::vector<Interaction> kept;
    for (const auto& it : log.interactions)
      if (uc[it.user] >= min_count && ic[it.item] >= min_count) kept.push_back(it);
    if (kept.size() == log.interactions.size()) break;
    log.interactions = std::move(kept);
  }
  log.reindex();
  return log;
}

bool same_triples(const InteractionLog& a, const InteractionLog& b) {
  if (a.interactions.size() != b.interactions.size()) return false;
  for (std::size_t i = 0; i < a.interactions.size(); ++i) {
    const auto& x = a.interactions[i];
    const auto& y = b.interactions[i];
    if (x.user != y.user || x.item != y.item || x.timestamp != y.timestamp) return false;
  }
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// parsing

TEST_CASE("parse_interactions reads tab-separated triples") {
  std::istringstream in("u1\ti1\t5\nu1\ti2\t9\nu2\ti1\t7\n");
  InteractionLog log = parse_interactions(in);
  CHECK(log.n_users() == 2);
  CHECK(log.n_items() == 2);
  CHECK(log.interactions.size() == 3);
  CHECK(log.user_index.at("u1") == 0);
  CHECK(log.user_index.at("u2") == 1);
  CHECK(log.item_index.at("i1") == 0);
  CHECK(log.item_index.at("i2") == 1);
}

TEST_CASE("parse_interactions on empty stream yields empty log") {
  std::istringstream in("");
  InteractionLog log = parse_interactions(in);
  CHECK(log.n_users() == 0);
  CHECK(log.n_items() == 0);
  CHECK(log.interactions.empty());
}

TEST_CASE("parse_interactions rejects malformed lines with the line number") {
  std::istringstream two_fields("u1\ti1\n");
  CHECK_THROWS_WITH(parse_interactions(two_fields), Catch::Matchers::ContainsSubstring("line 1"));
  std::istringstream bad_ts("u1\ti1\t5\nu2\ti2\tnope\n");
  CHECK_THROWS_WITH(parse_interactions(bad_ts), Catch::Matchers::ContainsSubstring("line 2"));
  std::istringstream negative("u1\ti1\t-3\n");
  CHECK_THROWS_AS(parse_interactions(negative), DataError);
}

// ---------------------------------------------------------------------------
// core filtering

TEST_CASE("core_filter removes a user with four interactions") {
  std::vector<std::tuple<std::string, std::string, std::int64_t>> triples;
  for (int u = 0; u < 5; ++u)
    for (int i = 0; i < 5; ++i) triples.emplace_back("core" + std::to_string(u), "i" + std::to_string(i), i);
  for (int i = 0; i < 4; ++i) triples.emplace_back("shorty", "i" + std::to_string(i), i);
  InteractionLog log = log_from_triples(triples);

  InteractionLog filtered = core_filter(log, 5);
  CHECK(filtered.n_users() == 5);
  CHECK(filtered.user_index.find("shorty") == filtered.user_index.end());
  CHECK(filtered.interactions.size() == 25);
}

TEST_CASE("core_filter cascades to a fixed point") {
  std::vector<std::tuple<std::string, std::string, std::int64_t>> triples;
  for (int u = 0; u < 5; ++u)
    for (int i = 0; i < 5; ++i) triples.emplace_back("core" + std::to_string(u), "i" + std::to_string(i), i);
  // rare item held at exactly 5 by the soon-to-be-removed user
  triples.emplace_back("shorty", "rare", 0);
  for (int i = 0; i < 3; ++i) triples.emplace_back("shorty", "i" + std::to_string(i), i + 10);
  for (int u = 0; u < 4; ++u) triples.emplace_back("core" + std::to_string(u), "rare", 20);
  InteractionLog log = log_from_triples(triples);

  InteractionLog filtered = core_filter(log, 5);
  CHECK(filtered.item_index.find("rare") == filtered.item_index.end());
  CHECK(filtered.n_users() == 5);
  CHECK(filtered.n_items() == 5);
  CHECK(same_triples(filtered, oracle_filter(log, 5)));
}

TEST_CASE("core_filter leaves an already-dense log unchanged") {
  std::vector<std::tuple<std::string, std::string, std::int64_t>> triples;
  for (int u = 0; u < 5; ++u)
    for (int i = 0; i < 5; ++i) triples.emplace_back("u" + std::to_string(u), "i" + std::to_string(i), i);
  InteractionLog log = log_from_triples(triples);
  InteractionLog filtered = core_filter(log, 5);
  CHECK(same_triples(filtered, log));
}

TEST_CASE("core_filter matches the repeat-until-stable oracle on random logs") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed * 71 + 3);
    std::vector<std::tuple<std::string, std::string, std::int64_t>> triples;
    const int n = 40 + static_cast<int>(rng.below(80));
    for (int k = 0; k < n; ++k)
      triples.emplace_back("u" + std::to_string(rng.below(8)), "i" + std::to_string(rng.below(10)),
                           static_cast<std::int64_t>(k));
    InteractionLog log = log_from_triples(triples);
    const int min_count = 2 + static_cast<int>(rng.below(4));
    CHECK(same_triples(core_filter(log, min_count), oracle_filter(log, min_count)));
  }
}

// ---------------------------------------------------------------------------
// sequences and split

TEST_CASE("build_sequences sorts by timestamp") {
  InteractionLog log = log_from_triples({{"u", "i3", 7}, {"u", "i1", 2}, {"u", "i2", 5}});
  auto seqs = build_sequences(log);
  REQUIRE(seqs.size() == 1);
  CHECK(seqs[0].items == std::vector<int>{log.item_index.at("i1"), log.item_index.at("i2"), log.item_index.at("i3")});
}

TEST_CASE("build_sequences breaks timestamp ties by dense item id") {
  // i2 appears first in the file, so dense(i2) < dense(i9)
  InteractionLog log = log_from_triples({{"x", "i2", 1}, {"x", "i9", 2}, {"u", "i9", 4}, {"u", "i2", 4}});
  REQUIRE(log.item_index.at("i2") < log.item_index.at("i9"));
  auto seqs = build_sequences(log);
  const auto& u_seq = seqs[static_cast<std::size_t>(log.user_index.at("u"))];
  CHECK(u_seq.items == std::vector<int>{log.item_index.at("i2"), log.item_index.at("i9")});
}

TEST_CASE("leave_one_out_split peels the last two items") {
  SplitDataset split = testutil::split_from({{1, 2, 3, 4, 5}}, 6);
  CHECK(split.train[0] == std::vector<int>{1, 2, 3});
  CHECK(split.valid[0] == 4);
  CHECK(split.test[0] == 5);

  SplitDataset tiny = testutil::split_from({{1, 2, 3}}, 4);
  CHECK(tiny.train[0] == std::vector<int>{1});
  CHECK(tiny.valid[0] == 2);
  CHECK(tiny.test[0] == 3);
}

TEST_CASE("leave_one_out_split reassembles the original sequence") {
  auto seqs = testutil::random_sequences(25, 12, 3, 15, 42);
  SplitDataset split = testutil::split_from(seqs, 12);
  for (std::size_t u = 0; u < seqs.size(); ++u) {
    std::vector<int> rebuilt = split.train[u];
    rebuilt.push_back(split.valid[u]);
    rebuilt.push_back(split.test[u]);
    CHECK(rebuilt == seqs[u]);
  }
}

TEST_CASE("leave_one_out_split rejects short sequences naming the user") {
  std::vector<UserSequence> seqs = {{0, {1, 2, 3}}, {1, {1, 2}}};
  CHECK_THROWS_WITH(leave_one_out_split(seqs, 4), Catch::Matchers::ContainsSubstring("user 1"));
}

TEST_CASE("truncate_recent returns the most recent items") {
  std::vector<int> seq{1, 2, 3, 4, 5};
  CHECK(truncate_recent(seq, 2) == std::vector<int>{4, 5});
  CHECK(truncate_recent(seq, 5) == seq);
  CHECK_THROWS_AS(truncate_recent(seq, 6), DataError);
  CHECK_THROWS_AS(truncate_recent(seq, 0), DataError);
}

// ---------------------------------------------------------------------------
// head/tail partition

namespace {
// Independent sort-and-cut oracle.
std::set<int> oracle_top(const std::vector<int>& scores, double alpha) {
  std::vector<int> order(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)]
               ? scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)]
               : a < b;
  });
  const int n_head = static_cast<int>(std::ceil(alpha * static_cast<double>(scores.size())));
  return std::set<int>(order.begin(), order.begin() + n_head);
}

std::vector<std::vector<int>> sequences_with_train_lengths(const std::vector<int>& lengths, int n_items) {
  std::vector<std::vector<int>> seqs;
  Rng rng(7);
  for (int len : lengths) {
    std::vector<int> s;
    for (int t = 0; t < len + 2; ++t) s.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(n_items))));
    seqs.push_back(std::move(s));
  }
  return seqs;
}
}  // namespace

TEST_CASE("partition_head_tail cuts users at ceil(alpha * n)") {
  const std::vector<int> lengths{9, 8, 7, 6, 5, 5, 4, 3, 2, 2};
  SplitDataset split = testutil::split_from(sequences_with_train_lengths(lengths, 30), 30);
  HeadTailPartition part = partition_head_tail(split, 0.2);

  const std::set<int> expected = oracle_top(lengths, 0.2);
  CHECK(expected == std::set<int>{0, 1});  // lengths 9 and 8
  for (int u = 0; u < split.n_users(); ++u) CHECK(part.head_user(u) == (expected.count(u) > 0));
  CHECK(part.kappa_u == 8);
  CHECK(part.l_min_user == 8);
  CHECK(part.l_max_user == 9);
}

TEST_CASE("partition_head_tail breaks item-count ties by id") {
  // training counts per item: item0 7x, item1 5x, item2 5x, item3 2x
  std::vector<std::vector<int>> seqs;
  std::vector<int> items;
  for (int k = 0; k < 7; ++k) items.push_back(0);
  for (int k = 0; k < 5; ++k) items.push_back(1);
  for (int k = 0; k < 5; ++k) items.push_back(2);
  for (int k = 0; k < 2; ++k) items.push_back(3);
  // one user per item occurrence keeps counts exact: train length 1 each
  for (int it : items) seqs.push_back({it, 0, 0});  // last two peel off into valid/test
  SplitDataset split = testutil::split_from(seqs, 4);

  std::vector<int> counts = train_popularity(split);
  CHECK(counts == std::vector<int>{7, 5, 5, 2});
  HeadTailPartition part = partition_head_tail(split, 0.5);
  CHECK(part.head_item(0));
  CHECK(part.head_item(1));  // the count-5 item with the smaller id
  CHECK_FALSE(part.head_item(2));
  CHECK_FALSE(part.head_item(3));
  CHECK(part.kappa_i == 5);

  const std::set<int> expected = oracle_top(counts, 0.5);
  for (int i = 0; i < 4; ++i) CHECK(part.head_item(i) == (expected.count(i) > 0));
}

TEST_CASE("partition with alpha = 1 makes everything head") {
  SplitDataset split = testutil::split_from(testutil::random_sequences(8, 10, 3, 9, 5), 10);
  HeadTailPartition part = partition_head_tail(split, 1.0);
  for (int u = 0; u < split.n_users(); ++u) CHECK(part.head_user(u));
  for (int i = 0; i < split.n_items; ++i) CHECK(part.head_item(i));
}

TEST_CASE("partition invariants hold on random splits") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto seqs = testutil::random_sequences(12 + static_cast<int>(seed % 9), 15, 3, 20, seed * 13);
    SplitDataset split = testutil::split_from(seqs, 15);
    Rng arng(seed);
    const double alpha = 0.05 + 0.9 * arng.uniform();
    HeadTailPartition part = partition_head_tail(split, alpha);

    const int n_head_users = static_cast<int>(part.head_users().size());
    CHECK(n_head_users == static_cast<int>(std::ceil(alpha * split.n_users())));
    const int n_head_items = static_cast<int>(part.head_items().size());
    CHECK(n_head_items == static_cast<int>(std::ceil(alpha * split.n_items)));

    // every head user's train length >= every tail user's
    int min_head = INT32_MAX, max_tail = -1;
    for (int u = 0; u < split.n_users(); ++u) {
      const int len = static_cast<int>(split.train[static_cast<std::size_t>(u)].size());
      if (part.head_user(u))
        min_head = std::min(min_head, len);
      else
        max_tail = std::max(max_tail, len);
    }
    if (max_tail >= 0) CHECK(min_head >= max_tail);
    CHECK(part.kappa_u == min_head);
  }
}

TEST_CASE("partition rejects alpha outside (0, 1]") {
  SplitDataset split = testutil::split_from({{1, 2, 3}}, 4);
  CHECK_THROWS_AS(partition_head_tail(split, 0.0), ConfigError);
  CHECK_THROWS_AS(partition_head_tail(split, 1.5), ConfigError);
}

// ---------------------------------------------------------------------------
// subsequence index

namespace {
// Brute-force double loop over (sequence, position) pairs.
SubsequenceIndex oracle_index(const SplitDataset& split, bool reversed, int max_len) {
  SubsequenceIndex idx;
  idx.include_reversed = reversed;
  idx.max_len = max_len;
  idx.entries.resize(static_cast<std::size_t>(split.n_items));
  auto clip = [&](std::vector<int> v) {
    while (v.size() > static_cast<std::size_t>(max_len)) v.erase(v.begin());
    return v;
  };
  for (int u = 0; u < split.n_users(); ++u) {
    const auto& seq = split.train[static_cast<std::size_t>(u)];
    for (std::size_t t = 0; t < seq.size(); ++t) {
      std::vector<int> fwd(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(t) + 1);
      idx.entries[static_cast<std::size_t>(seq[t])].push_back({u, clip(fwd)});
    }
    if (reversed) {
      for (std::size_t t = 0; t < seq.size(); ++t) {
        std::vector<int> rev;
        for (std::size_t j = seq.size(); j-- > t;) rev.push_back(seq[j]);
        idx.entries[static_cast<std::size_t>(seq[t])].push_back({u, clip(rev)});
      }
    }
  }
  return idx;
}

bool index_equal(const SubsequenceIndex& a, const SubsequenceIndex& b) {
  if (a.entries.size() != b.entries.size()) return false;
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    if (a.entries[i].size() != b.entries[i].size()) return false;
    for (std::size_t s = 0; s < a.entries[i].size(); ++s)
      if (a.entries[i][s].owner != b.entries[i][s].owner || a.entries[i][s].items != b.entries[i][s].items)
        return false;
  }
  return true;
}
}  // namespace

TEST_CASE("subsequence index reproduces the worked two-sequence example") {
  // train sequences [1,2,4] and [1,3,2,4] over items 0..4
  SplitDataset split;
  split.n_items = 5;
  split.train = {{1, 2, 4}, {1, 3, 2, 4}};
  split.valid = {0, 0};
  split.test = {0, 0};

  SubsequenceIndex fwd = build_subsequence_index(split, false, 50);
  REQUIRE(fwd.size_of(2) == 2);
  CHECK(fwd.at(2)[0].items == std::vector<int>{1, 2});
  CHECK(fwd.at(2)[1].items == std::vector<int>{1, 3, 2});

  SubsequenceIndex both = build_subsequence_index(split, true, 50);
  REQUIRE(both.size_of(2) == 4);
  int n_rev_42 = 0;
  for (const auto& sub : both.at(2))
    if (sub.items == std::vector<int>{4, 2}) ++n_rev_42;
  CHECK(n_rev_42 == 2);  // one reversed suffix per sequence
}

TEST_CASE("subsequence index includes singleton prefixes") {
  SplitDataset split;
  split.n_items = 3;
  split.train = {{2, 0, 1}};
  split.valid = {0};
  split.test = {0};
  SubsequenceIndex idx = build_subsequence_index(split, false, 50);
  REQUIRE(idx.size_of(2) == 1);
  CHECK(idx.at(2)[0].items == std::vector<int>{2});
}

TEST_CASE("subsequence index keeps the elements nearest the key item") {
  SplitDataset split;
  split.n_items = 10;
  split.train = {{0, 1, 2, 3, 4, 5, 6}};
  split.valid = {0};
  split.test = {0};
  SubsequenceIndex idx = build_subsequence_index(split, true, 3);
  // forward prefix ending at 6 keeps [4,5,6]
  bool found_fwd = false, found_rev = false;
  for (const auto& sub : idx.at(6))
    if (sub.items == std::vector<int>{4, 5, 6}) found_fwd = true;
  // reversed suffix for key 0 is [6,5,...,0] clipped to [2,1,0]
  for (const auto& sub : idx.at(0))
    if (sub.items == std::vector<int>{2, 1, 0}) found_rev = true;
  CHECK(found_fwd);
  CHECK(found_rev);
}

TEST_CASE("subsequence index matches the brute-force oracle on random logs") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed * 31 + 1);
    const int n_users = 2 + static_cast<int>(rng.below(19));
    const int n_items = 2 + static_cast<int>(rng.below(14));
    auto seqs = testutil::random_sequences(n_users, n_items, 3, 12, seed * 17 + 5);
    SplitDataset split = testutil::split_from(seqs, n_items);
    for (bool reversed : {false, true}) {
      const int max_len = 2 + static_cast<int>(rng.below(10));
      CHECK(index_equal(build_subsequence_index(split, reversed, max_len), oracle_index(split, reversed, max_len)));
    }
  }
}

TEST_CASE("sample_subsequences draws without replacement deterministically") {
  SplitDataset split = testutil::split_from(testutil::random_sequences(6, 8, 4, 10, 77), 8);
  SubsequenceIndex idx = build_subsequence_index(split, true, 50);
  int item = 0;
  for (int i = 0; i < split.n_items; ++i)
    if (idx.size_of(i) >= 3) item = i;
  REQUIRE(idx.size_of(item) >= 3);

  Rng r1 = derive_rng(9, Stream::item_subseq, 0);
  Rng r2 = derive_rng(9, Stream::item_subseq, 0);
  auto s1 = sample_subsequences(idx, item, 3, r1);
  auto s2 = sample_subsequences(idx, item, 3, r2);
  REQUIRE(s1.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(s1[k].owner == s2[k].owner);
    CHECK(s1[k].items == s2[k].items);
  }
  // distinctness: sampled index positions cannot repeat, so (owner, items)
  // triples drawn from distinct positions; sampling the full set returns it
  Rng r3 = derive_rng(9, Stream::item_subseq, 1);
  auto full = sample_subsequences(idx, item, idx.size_of(item), r3);
  CHECK(static_cast<int>(full.size()) == idx.size_of(item));

  Rng r4 = derive_rng(9, Stream::item_subseq, 2);
  CHECK_THROWS_AS(sample_subsequences(idx, item, idx.size_of(item) + 1, r4), DataError);
  auto one = sample_subsequences(idx, item, 1, r4);
  CHECK(one.size() == 1);
}

// ---------------------------------------------------------------------------
// synthetic generation

TEST_CASE("generate_synthetic is bit-identical under a fixed seed") {
  SyntheticConfig cfg;
  cfg.n_users = 60;
  cfg.n_items = 40;
  cfg.seed = 123;
  InteractionLog a = generate_synthetic(cfg);
  InteractionLog b = generate_synthetic(cfg);
  CHECK(same_triples(a, b));
  cfg.seed = 124;
  CHECK_FALSE(same_triples(a, generate_synthetic(cfg)));
}

TEST_CASE("generate_synthetic survives core filtering unchanged") {
  SyntheticConfig cfg;
  cfg.n_users = 80;
  cfg.n_items = 50;
  cfg.seed = 5;
  InteractionLog log = generate_synthetic(cfg);
  CHECK(same_triples(core_filter(log, 5), log));
}

TEST_CASE("generate_synthetic produces a long-tailed item distribution") {
  SyntheticConfig cfg;
  cfg.n_users = 2000;
  cfg.n_items = 500;
  cfg.zipf_exponent = 1.2;
  cfg.mean_seq_len = 15.0;
  cfg.seed = 20240613;
  InteractionLog log = generate_synthetic(cfg);
  REQUIRE(log.interactions.size() >= 30000);

  std::map<std::string, long> counts;
  for (const auto& it : log.interactions) ++counts[it.item];
  std::vector<long> sorted;
  for (const auto& [k, v] : counts) sorted.push_back(v);
  std::sort(sorted.rbegin(), sorted.rend());
  for (std::size_t i = 1; i < sorted.size(); ++i) CHECK(sorted[i] <= sorted[i - 1]);

  const std::size_t top = sorted.size() / 5;
  long covered = 0, total = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    total += sorted[i];
    if (i < top) covered += sorted[i];
  }
  CHECK(static_cast<double>(covered) / static_cast<double>(total) > 0.5);
}

TEST_CASE("generate_synthetic rejects infeasible configs") {
  SyntheticConfig cfg;
  cfg.n_items = 4;
  cfg.min_seq_len = 5;
  CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
}

// ---------------------------------------------------------------------------
// split hygiene

TEST_CASE("hygiene audit passes on train-derived artifacts and catches leaks") {
  auto seqs = testutil::random_sequences(30, 20, 4, 14, 99);
  SplitDataset split = testutil::split_from(seqs, 20);
  SubsequenceIndex index = build_subsequence_index(split, true, 50);
  HeadTailPartition part = partition_head_tail(split, 0.3, &index);
  CHECK(audit_split_hygiene(split, part, index).ok);

  // leak the valid/test items into the popularity counts via full sequences
  SplitDataset leaked = split;
  for (std::size_t u = 0; u < seqs.size(); ++u) leaked.train[u] = seqs[u];
  SubsequenceIndex leaked_index = build_subsequence_index(leaked, true, 50);
  HeadTailPartition leaked_part = partition_head_tail(leaked, 0.3, &leaked_index);
  const bool caught = !audit_split_hygiene(split, leaked_part, leaked_index).ok;
  CHECK(caught);
}
