#include "cvp/event_log.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cvp/errors.hpp"
#include "cvp/io_util.hpp"

namespace cvp {

using nlohmann::json;

std::string record_context(const std::string& item_id, int t, long long line) {
  std::string out = "item '" + item_id + "'";
  if (t >= 0) out += ", t=" + std::to_string(t);
  if (line >= 0) out += " (line " + std::to_string(line) + ")";
  return out;
}

int ItemTrajectory::j_final() const {
  int j = 0;
  for (const auto& e : events) j += e.is_write() ? 1 : 0;
  return j;
}

std::int64_t ItemTrajectory::vote_count() const {
  std::int64_t n = 0;
  for (const auto& e : events) n += e.is_vote() ? 1 : 0;
  return n;
}

bool ItemTrajectory::has_gaps() const {
  return std::any_of(events.begin(), events.end(), [](const ActionRecord& e) { return e.is_gap(); });
}

std::int64_t Dataset::n_votes() const {
  std::int64_t n = 0;
  for (const auto& item : items) n += item.vote_count();
  return n;
}

const ItemTrajectory* Dataset::find_item(const std::string& item_id) const {
  for (const auto& item : items)
    if (item.item_id == item_id) return &item;
  return nullptr;
}

void UrnConfig::validate() const {
  if (!(x0 > 0) || !(y0 > 0) || !(w > 0))
    throw std::invalid_argument("urn config requires x0 > 0, y0 > 0, w > 0");
}

namespace {

[[noreturn]] void malformed(const std::string& msg, const std::string& item, int t, long long line) {
  throw MalformedRecord(msg + ": " + record_context(item, t, line));
}

std::int64_t require_int(const json& j, const char* key, const std::string& item, int t, long long line) {
  auto it = j.find(key);
  if (it == j.end()) malformed(std::string("missing field '") + key + "'", item, t, line);
  if (!it->is_number_integer()) malformed(std::string("field '") + key + "' must be an integer", item, t, line);
  return it->get<std::int64_t>();
}

// Checks `order` is a permutation of 0..J-1.
void check_permutation(const std::vector<int>& order, int J, const std::string& item, int t, long long line) {
  if (static_cast<int>(order.size()) != J)
    throw BadDisplayOrder("display order lists " + std::to_string(order.size()) + " responses, expected " +
                          std::to_string(J) + ": " + record_context(item, t, line));
  std::vector<char> seen(static_cast<size_t>(J), 0);
  for (int r : order) {
    if (r < 0 || r >= J || seen[static_cast<size_t>(r)])
      throw BadDisplayOrder("display order is not a permutation of existing responses: " +
                            record_context(item, t, line));
    seen[static_cast<size_t>(r)] = 1;
  }
}

const std::set<std::string> kWriteKeys = {"item", "t", "action", "length", "order"};
const std::set<std::string> kVoteKeys = {"item", "t", "action", "response", "polarity", "order"};
const std::set<std::string> kGapKeys = {"item", "t", "action", "votes_missing"};
const std::set<std::string> kMetaKeys = {"item", "response", "comment_count", "avg_sentiment", "group_tag"};

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& item, int t,
                long long line) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) malformed("unknown field '" + it.key() + "'", item, t, line);
}

}  // namespace

Dataset ingest_event_log(std::istream& in, const std::string& community_id) {
  Dataset ds;
  ds.community_id = community_id;

  std::map<std::string, size_t> item_index;  // id -> position in ds.items
  std::string linebuf;
  long long line = 0;
  std::int64_t seq = 0;

  while (std::getline(in, linebuf)) {
    ++line;
    if (linebuf.empty()) continue;

    json j;
    try {
      j = json::parse(linebuf);
    } catch (const json::parse_error& e) {
      throw MalformedRecord("invalid JSON at line " + std::to_string(line) + ": " + e.what());
    }
    if (!j.is_object()) throw MalformedRecord("record is not an object (line " + std::to_string(line) + ")");

    auto item_it = j.find("item");
    if (item_it == j.end() || !item_it->is_string())
      throw MalformedRecord("missing or non-string 'item' (line " + std::to_string(line) + ")");
    const std::string item_id = item_it->get<std::string>();

    const std::int64_t t64 = require_int(j, "t", item_id, -1, line);
    if (t64 < 1 || t64 > (1LL << 31))
      malformed("'t' out of range", item_id, static_cast<int>(t64), line);
    const int t = static_cast<int>(t64);

    auto action_it = j.find("action");
    if (action_it == j.end() || !action_it->is_string())
      malformed("missing or non-string 'action'", item_id, t, line);
    const std::string action = action_it->get<std::string>();

    auto idx_it = item_index.find(item_id);
    if (idx_it == item_index.end()) {
      idx_it = item_index.emplace(item_id, ds.items.size()).first;
      ds.items.push_back(ItemTrajectory{item_id, {}});
    }
    ItemTrajectory& traj = ds.items[idx_it->second];

    const int expected_t = traj.T() + 1;
    if (t != expected_t)
      throw NonContiguousTime("expected t=" + std::to_string(expected_t) + ", got t=" + std::to_string(t) +
                              ": " + record_context(item_id, t, line));
    const int J = traj.j_final();  // responses existing before this event

    ActionRecord rec;
    rec.item_id = item_id;
    rec.t = t;
    rec.seq = seq++;

    std::optional<std::vector<int>> order;
    if (auto o = j.find("order"); o != j.end()) {
      if (!o->is_array()) malformed("'order' must be an array of integers", item_id, t, line);
      std::vector<int> v;
      v.reserve(o->size());
      for (const auto& e : *o) {
        if (!e.is_number_integer()) malformed("'order' must be an array of integers", item_id, t, line);
        v.push_back(e.get<int>());
      }
      order = std::move(v);
    }

    if (action == "write") {
      check_keys(j, kWriteKeys, item_id, t, line);
      const std::int64_t len = require_int(j, "length", item_id, t, line);
      if (len < 1) malformed("write 'length' must be >= 1", item_id, t, line);
      rec.action = WriteAction{len};
      if (order) check_permutation(*order, J, item_id, t, line);
      rec.display_order = std::move(order);
    } else if (action == "vote") {
      check_keys(j, kVoteKeys, item_id, t, line);
      if (t == 1) malformed("first event of an item must be a write", item_id, t, line);
      const std::int64_t resp = require_int(j, "response", item_id, t, line);
      const std::int64_t pol = require_int(j, "polarity", item_id, t, line);
      if (pol != 0 && pol != 1) malformed("'polarity' must be 0 or 1", item_id, t, line);
      if (resp < 0 || resp >= J)
        throw DanglingVote("vote references response " + std::to_string(resp) + " but only " +
                           std::to_string(J) + " exist: " + record_context(item_id, t, line));
      if (!order) malformed("vote record requires 'order'", item_id, t, line);
      check_permutation(*order, J, item_id, t, line);
      rec.action = VoteAction{static_cast<int>(resp), static_cast<int>(pol)};
      rec.display_order = std::move(order);
    } else if (action == "gap") {
      check_keys(j, kGapKeys, item_id, t, line);
      if (t == 1) malformed("first event of an item must be a write", item_id, t, line);
      const std::int64_t missing = require_int(j, "votes_missing", item_id, t, line);
      if (missing < 0) malformed("'votes_missing' must be >= 0", item_id, t, line);
      rec.action = GapAction{missing};
    } else {
      malformed("unknown action '" + action + "'", item_id, t, line);
    }

    traj.events.push_back(std::move(rec));
  }

  for (const auto& item : ds.items) {
    if (item.events.empty() || !item.events.front().is_write())
      throw MalformedRecord("first event of an item must be a write: " + record_context(item.item_id, 1));
  }
  return ds;
}

Dataset ingest_event_log_file(const std::string& path, const std::string& community_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedRecord("cannot open event log: " + path);
  return ingest_event_log(in, community_id);
}

void attach_metadata(Dataset& ds, std::istream& in) {
  // response counts per item, for referential checks
  std::map<std::string, int> j_final;
  for (const auto& item : ds.items) j_final[item.item_id] = item.j_final();

  std::set<std::pair<std::string, int>> seen;
  std::vector<ResponseMeta> rows;
  std::string linebuf;
  long long line = 0;
  while (std::getline(in, linebuf)) {
    ++line;
    if (linebuf.empty()) continue;
    json j;
    try {
      j = json::parse(linebuf);
    } catch (const json::parse_error& e) {
      throw MalformedRecord("invalid JSON at line " + std::to_string(line) + ": " + e.what());
    }
    if (!j.is_object()) throw MalformedRecord("record is not an object (line " + std::to_string(line) + ")");
    auto item_it = j.find("item");
    if (item_it == j.end() || !item_it->is_string())
      throw MalformedRecord("missing or non-string 'item' (line " + std::to_string(line) + ")");
    ResponseMeta row;
    row.item_id = item_it->get<std::string>();
    check_keys(j, kMetaKeys, row.item_id, -1, line);

    row.response = static_cast<int>(require_int(j, "response", row.item_id, -1, line));
    row.comment_count = require_int(j, "comment_count", row.item_id, -1, line);
    if (auto s = j.find("avg_sentiment"); s != j.end() && !s->is_null()) {
      if (!s->is_number()) malformed("'avg_sentiment' must be a number", row.item_id, -1, line);
      const double v = s->get<double>();
      if (v < -5.0 || v > 5.0) malformed("'avg_sentiment' outside [-5, 5]", row.item_id, -1, line);
      row.avg_sentiment = v;
    }
    if (auto g = j.find("group_tag"); g != j.end() && !g->is_null()) {
      if (!g->is_string()) malformed("'group_tag' must be a string", row.item_id, -1, line);
      row.group_tag = g->get<std::string>();
    }

    auto jf = j_final.find(row.item_id);
    if (jf == j_final.end())
      throw MalformedRecord("metadata references unknown " + record_context(row.item_id, -1, line));
    if (row.response < 0 || row.response >= jf->second)
      throw MalformedRecord("metadata references response " + std::to_string(row.response) +
                            " of " + record_context(row.item_id, -1, line) + " which has only " +
                            std::to_string(jf->second) + " responses");
    if (!seen.emplace(row.item_id, row.response).second)
      throw MalformedRecord("duplicate metadata row for " + record_context(row.item_id, -1, line));
    rows.push_back(std::move(row));
  }
  ds.metadata = std::move(rows);
}

void attach_metadata_file(Dataset& ds, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedRecord("cannot open metadata file: " + path);
  attach_metadata(ds, in);
}

namespace {

void append_order(std::string& out, const std::vector<int>& order) {
  out += ",\"order\":[";
  for (size_t i = 0; i < order.size(); ++i) {
    if (i) out += ',';
    out += format_int(order[i]);
  }
  out += ']';
}

}  // namespace

std::string serialize_event_log(const Dataset& ds) {
  std::vector<const ActionRecord*> recs;
  for (const auto& item : ds.items)
    for (const auto& e : item.events) recs.push_back(&e);
  std::stable_sort(recs.begin(), recs.end(),
                   [](const ActionRecord* a, const ActionRecord* b) { return a->seq < b->seq; });

  std::string out;
  for (const ActionRecord* e : recs) {
    out += "{\"item\":" + json(e->item_id).dump() + ",\"t\":" + format_int(e->t);
    if (e->is_write()) {
      out += ",\"action\":\"write\",\"length\":" + format_int(e->write().length);
      if (e->display_order) append_order(out, *e->display_order);
    } else if (e->is_vote()) {
      out += ",\"action\":\"vote\",\"response\":" + format_int(e->vote().response) +
             ",\"polarity\":" + format_int(e->vote().polarity);
      append_order(out, *e->display_order);
    } else {
      out += ",\"action\":\"gap\",\"votes_missing\":" + format_int(e->gap().votes_missing);
    }
    out += "}\n";
  }
  return out;
}

std::string serialize_metadata(const Dataset& ds) {
  std::string out;
  for (const auto& r : ds.metadata) {
    out += "{\"item\":" + json(r.item_id).dump() + ",\"response\":" + format_int(r.response) +
           ",\"comment_count\":" + format_int(r.comment_count);
    if (r.avg_sentiment) out += ",\"avg_sentiment\":" + format_double(*r.avg_sentiment);
    if (!r.group_tag.empty()) out += ",\"group_tag\":" + json(r.group_tag).dump();
    out += "}\n";
  }
  return out;
}

}  // namespace cvp
