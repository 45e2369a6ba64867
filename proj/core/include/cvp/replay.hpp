#pragma once

#include <vector>

#include "cvp/types.hpp"

namespace cvp {

// Snapshot of one item between two events. Indexed by response (write order).
struct ItemState {
  int J = 0;
  double mean_length = 0.0;
  // True when display_rank comes from the upcoming event's own display_order;
  // false when it was carried forward from the last observed order.
  bool ranks_observed = true;

  std::vector<int> pos_votes;
  std::vector<int> neg_votes;
  std::vector<double> urn_x;
  std::vector<double> urn_y;
  std::vector<double> ratio_pos;   // r = x / (x + y)
  std::vector<double> ratio_neg;   // s = 1 - r, exact complement
  std::vector<std::int64_t> length;
  std::vector<double> rel_length;  // u = length / mean_length
  std::vector<int> display_rank;   // 1-based; permutation of 1..J
  std::vector<int> last_vote_t;    // event index of latest vote, 0 if none
};

// Incrementally maintains an ItemState; shared by the replayer and the
// simulator so both produce identical feature values.
class StateBuilder {
 public:
  explicit StateBuilder(const UrnConfig& urn);

  void apply_write(std::int64_t length);
  void apply_vote(int response, int polarity, int t);
  void apply(const ActionRecord& event);  // throws on gap records

  const ItemState& state() const { return state_; }
  ItemState& state() { return state_; }

 private:
  UrnConfig urn_;
  ItemState state_;
};

// Deterministic replay: result[k] is the state after events 1..k, i.e. the
// state the user at event k+1 observed. result.size() == T+1; the last entry
// is the final snapshot. Display ranks in result[k] come from event k+1's
// display_order when present, otherwise they carry the last observed order
// forward (new responses appended in write order).
std::vector<ItemState> replay(const ItemTrajectory& traj, const UrnConfig& urn);

// Final-snapshot display ranks only (the last entry of replay()'s ranks).
std::vector<int> final_display_ranks(const ItemTrajectory& traj);

}  // namespace cvp
