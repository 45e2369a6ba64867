#pragma once

#include <iosfwd>
#include <string>

#include "cvp/types.hpp"

namespace cvp {

// Parses a line-delimited event log (one flat JSON object per line) into a
// validated Dataset. Items may interleave in the stream; within an item the
// event index t must advance 1, 2, 3, ... in stream order. Throws
// MalformedRecord / NonContiguousTime / DanglingVote / BadDisplayOrder with
// the offending item, t and line.
Dataset ingest_event_log(std::istream& in, const std::string& community_id = "community");
Dataset ingest_event_log_file(const std::string& path, const std::string& community_id = "community");

// Parses the per-response metadata sidecar and attaches it to `ds`. Rows must
// reference responses that exist in the dataset.
void attach_metadata(Dataset& ds, std::istream& in);
void attach_metadata_file(Dataset& ds, const std::string& path);

// Canonical serialization: records in global `seq` order, fixed key order,
// one record per line. ingest -> serialize is byte-identical for canonical
// input, and serialize -> ingest always round-trips.
std::string serialize_event_log(const Dataset& ds);
std::string serialize_metadata(const Dataset& ds);

}  // namespace cvp
