#include "cvp/preprocess.hpp"

#include <algorithm>
#include <set>

namespace cvp {

std::string FilterReport::summary() const {
  std::string out;
  out += "dropped (fewer responses than threshold): " + std::to_string(dropped_min_responses.size()) + "\n";
  out += "dropped (fragmented beyond stitch gap):   " + std::to_string(dropped_fragmented.size()) + "\n";
  out += "stitched (gap within threshold):          " + std::to_string(stitched.size()) + "\n";
  return out;
}

FilterResult preprocess_filter(const Dataset& ds, int min_responses, int stitch_gap) {
  FilterResult out;
  out.dataset.community_id = ds.community_id;

  std::set<std::string> kept;
  for (const auto& item : ds.items) {
    bool fragmented = false;
    bool had_gap = false;
    for (const auto& e : item.events) {
      if (e.is_gap()) {
        had_gap = true;
        if (e.gap().votes_missing > stitch_gap) {
          fragmented = true;
          break;
        }
      }
    }
    if (fragmented) {
      out.report.dropped_fragmented.push_back(item.item_id);
      continue;
    }

    ItemTrajectory traj;
    traj.item_id = item.item_id;
    if (had_gap) {
      traj.events.reserve(item.events.size());
      int t = 0;
      for (const auto& e : item.events) {
        if (e.is_gap()) continue;
        ActionRecord rec = e;
        rec.t = ++t;
        traj.events.push_back(std::move(rec));
      }
      out.report.stitched.push_back(item.item_id);
    } else {
      traj.events = item.events;
    }

    if (traj.j_final() < min_responses) {
      out.report.dropped_min_responses.push_back(item.item_id);
      continue;
    }
    kept.insert(traj.item_id);
    out.dataset.items.push_back(std::move(traj));
  }

  for (const auto& row : ds.metadata)
    if (kept.count(row.item_id)) out.dataset.metadata.push_back(row);

  return out;
}

}  // namespace cvp
