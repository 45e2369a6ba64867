#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace cvp {

// A new response of `length` characters.
struct WriteAction {
  std::int64_t length = 0;
};

// A helpfulness vote on an existing response. polarity: 1 positive, 0 negative.
struct VoteAction {
  int response = 0;
  int polarity = 0;
};

// Marker between trajectory fragments: `votes_missing` votes happened on the
// platform but were not observed. Removed (or the item dropped) by
// preprocess_filter before any replay.
struct GapAction {
  std::int64_t votes_missing = 0;
};

// One observed event. `display_order` lists response indices as shown to the
// user immediately BEFORE the event, best rank first; empty/absent for the
// item's first event. It is observed data, never recomputed.
struct ActionRecord {
  std::string item_id;
  int t = 0;  // 1-based event index within the item
  std::variant<WriteAction, VoteAction, GapAction> action;
  std::optional<std::vector<int>> display_order;
  std::int64_t seq = 0;  // position in the community-global event order

  bool is_write() const { return std::holds_alternative<WriteAction>(action); }
  bool is_vote() const { return std::holds_alternative<VoteAction>(action); }
  bool is_gap() const { return std::holds_alternative<GapAction>(action); }
  const WriteAction& write() const { return std::get<WriteAction>(action); }
  const VoteAction& vote() const { return std::get<VoteAction>(action); }
  const GapAction& gap() const { return std::get<GapAction>(action); }
};

struct ItemTrajectory {
  std::string item_id;
  std::vector<ActionRecord> events;

  int T() const { return static_cast<int>(events.size()); }
  int j_final() const;     // number of Write events
  std::int64_t vote_count() const;
  bool has_gaps() const;
};

// Sidecar row attaching comment statistics to one response.
struct ResponseMeta {
  std::string item_id;
  int response = 0;
  std::int64_t comment_count = 0;
  std::optional<double> avg_sentiment;  // in [-5, 5]
  std::string group_tag;                // empty when absent
};

struct Dataset {
  std::string community_id = "community";
  std::vector<ItemTrajectory> items;
  std::vector<ResponseMeta> metadata;

  int m() const { return static_cast<int>(items.size()); }
  std::int64_t n_votes() const;
  bool has_metadata() const { return !metadata.empty(); }
  const ItemTrajectory* find_item(const std::string& item_id) const;
};

// Polya urn configuration: fractional pseudo-votes plus the reinforcement
// increment returned with every drawn vote.
struct UrnConfig {
  double x0 = 1.0;
  double y0 = 1.0;
  double w = 1.0;

  void validate() const;  // throws std::invalid_argument
};

}  // namespace cvp
