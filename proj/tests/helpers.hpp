#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cvp/types.hpp"

namespace cvp::testing {

inline ActionRecord write_ev(const std::string& item, int t, std::int64_t length,
                             std::optional<std::vector<int>> order = std::nullopt) {
  ActionRecord rec;
  rec.item_id = item;
  rec.t = t;
  rec.action = WriteAction{length};
  rec.display_order = std::move(order);
  return rec;
}

inline ActionRecord vote_ev(const std::string& item, int t, int response, int polarity,
                            std::vector<int> order) {
  ActionRecord rec;
  rec.item_id = item;
  rec.t = t;
  rec.action = VoteAction{response, polarity};
  rec.display_order = std::move(order);
  return rec;
}

inline ActionRecord gap_ev(const std::string& item, int t, std::int64_t votes_missing) {
  ActionRecord rec;
  rec.item_id = item;
  rec.t = t;
  rec.action = GapAction{votes_missing};
  return rec;
}

inline ItemTrajectory make_item(const std::string& id, std::vector<ActionRecord> events) {
  return ItemTrajectory{id, std::move(events)};
}

// Assigns global seq item-major, the order serialize_event_log would emit.
inline Dataset make_dataset(std::vector<ItemTrajectory> items,
                            const std::string& community = "test") {
  Dataset ds;
  ds.community_id = community;
  ds.items = std::move(items);
  std::int64_t seq = 0;
  for (auto& item : ds.items)
    for (auto& e : item.events) e.seq = seq++;
  return ds;
}

// One item: a single response followed by the given votes, orders trivial.
inline ItemTrajectory single_response_item(const std::string& id, const std::vector<int>& votes,
                                           std::int64_t length = 100) {
  std::vector<ActionRecord> events;
  events.push_back(write_ev(id, 1, length));
  for (size_t k = 0; k < votes.size(); ++k)
    events.push_back(vote_ev(id, static_cast<int>(k) + 2, 0, votes[k], {0}));
  return make_item(id, std::move(events));
}

}  // namespace cvp::testing
