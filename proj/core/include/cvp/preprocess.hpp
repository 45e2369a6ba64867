#pragma once

#include <string>
#include <vector>

#include "cvp/types.hpp"

namespace cvp {

struct FilterReport {
  std::vector<std::string> dropped_min_responses;
  std::vector<std::string> dropped_fragmented;
  std::vector<std::string> stitched;

  std::string summary() const;
};

struct FilterResult {
  Dataset dataset;
  FilterReport report;
};

// Dataset cleanup before any model work:
//  - fragments separated by gap records with votes_missing <= stitch_gap are
//    stitched (the gap is removed and t renumbered; the replayed state simply
//    carries across), items with any larger gap are dropped as fragmented;
//  - items with fewer than min_responses responses are dropped.
// Metadata rows of dropped items are pruned. Total: never throws on valid input.
FilterResult preprocess_filter(const Dataset& ds, int min_responses = 5, int stitch_gap = 3);

}  // namespace cvp
