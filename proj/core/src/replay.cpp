#include "cvp/replay.hpp"

#include <cassert>

#include "cvp/errors.hpp"

namespace cvp {

StateBuilder::StateBuilder(const UrnConfig& urn) : urn_(urn) {
  urn_.validate();
}

void StateBuilder::apply_write(std::int64_t length) {
  ItemState& s = state_;
  s.J += 1;
  s.pos_votes.push_back(0);
  s.neg_votes.push_back(0);
  s.urn_x.push_back(urn_.x0);
  s.urn_y.push_back(urn_.y0);
  const double r0 = urn_.x0 / (urn_.x0 + urn_.y0);
  s.ratio_pos.push_back(r0);
  s.ratio_neg.push_back(1.0 - r0);
  s.length.push_back(length);
  s.rel_length.push_back(0.0);
  s.last_vote_t.push_back(0);
  s.display_rank.push_back(0);

  // the new response changes the average length, so every u moves
  double total = 0.0;
  for (auto len : s.length) total += static_cast<double>(len);
  s.mean_length = total / s.J;
  for (int j = 0; j < s.J; ++j)
    s.rel_length[static_cast<size_t>(j)] = static_cast<double>(s.length[static_cast<size_t>(j)]) / s.mean_length;
}

void StateBuilder::apply_vote(int response, int polarity, int t) {
  ItemState& s = state_;
  assert(response >= 0 && response < s.J);
  const auto j = static_cast<size_t>(response);
  if (polarity == 1) s.pos_votes[j] += 1;
  else s.neg_votes[j] += 1;
  // recomputed from the counts so x - x0 = w * n+ holds exactly
  s.urn_x[j] = urn_.x0 + urn_.w * s.pos_votes[j];
  s.urn_y[j] = urn_.y0 + urn_.w * s.neg_votes[j];
  const double r = s.urn_x[j] / (s.urn_x[j] + s.urn_y[j]);
  s.ratio_pos[j] = r;
  s.ratio_neg[j] = 1.0 - r;
  s.last_vote_t[j] = t;
}

void StateBuilder::apply(const ActionRecord& event) {
  if (event.is_write()) {
    apply_write(event.write().length);
  } else if (event.is_vote()) {
    apply_vote(event.vote().response, event.vote().polarity, event.t);
  } else {
    throw MalformedRecord("cannot replay an unstitched gap record: " +
                          record_context(event.item_id, event.t));
  }
}

namespace {

// Fills state.display_rank from `order`, appending responses the order does
// not cover (written after the order was observed) in write order.
void set_ranks(ItemState& s, const std::vector<int>& order, bool observed) {
  int rank = 1;
  std::vector<char> placed(static_cast<size_t>(s.J), 0);
  for (int resp : order) {
    s.display_rank[static_cast<size_t>(resp)] = rank++;
    placed[static_cast<size_t>(resp)] = 1;
  }
  for (int j = 0; j < s.J; ++j)
    if (!placed[static_cast<size_t>(j)]) s.display_rank[static_cast<size_t>(j)] = rank++;
  s.ranks_observed = observed && static_cast<int>(order.size()) == s.J;
}

}  // namespace

std::vector<ItemState> replay(const ItemTrajectory& traj, const UrnConfig& urn) {
  StateBuilder builder(urn);
  std::vector<ItemState> states;
  states.reserve(traj.events.size() + 1);

  std::vector<int> last_order;  // response indices, best first
  const int T = traj.T();
  for (int k = 0; k <= T; ++k) {
    if (k > 0) builder.apply(traj.events[static_cast<size_t>(k - 1)]);
    ItemState snap = builder.state();
    bool observed = false;
    if (k < T && traj.events[static_cast<size_t>(k)].display_order) {
      last_order = *traj.events[static_cast<size_t>(k)].display_order;
      observed = true;
    }
    set_ranks(snap, last_order, observed);
    states.push_back(std::move(snap));
  }
  return states;
}

std::vector<int> final_display_ranks(const ItemTrajectory& traj) {
  StateBuilder builder(UrnConfig{});
  std::vector<int> last_order;
  for (const auto& e : traj.events) {
    if (e.display_order) last_order = *e.display_order;
    builder.apply(e);
  }
  ItemState s = builder.state();
  set_ranks(s, last_order, false);
  return s.display_rank;
}

}  // namespace cvp
