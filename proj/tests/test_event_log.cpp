#include <doctest.h>

#include <sstream>

#include "cvp/errors.hpp"
#include "cvp/event_log.hpp"
#include "helpers.hpp"

using namespace cvp;

namespace {

Dataset ingest_str(const std::string& text) {
  std::istringstream in(text);
  return ingest_event_log(in);
}

void attach_str(Dataset& ds, const std::string& text) {
  std::istringstream in(text);
  attach_metadata(ds, in);
}

}  // namespace

TEST_CASE("minimal valid log") {
  const auto ds = ingest_str(
      "{\"item\":\"a\",\"t\":1,\"action\":\"write\",\"length\":100}\n"
      "{\"item\":\"a\",\"t\":2,\"action\":\"vote\",\"response\":0,\"polarity\":1,\"order\":[0]}\n");
  REQUIRE(ds.m() == 1);
  CHECK(ds.items[0].T() == 2);
  CHECK(ds.items[0].j_final() == 1);
  CHECK(ds.n_votes() == 1);
  CHECK(ds.items[0].events[1].vote().polarity == 1);
}

TEST_CASE("time gaps and duplicates are rejected") {
  CHECK_THROWS_AS(ingest_str("{\"item\":\"a\",\"t\":1,\"action\":\"write\",\"length\":100}\n"
                             "{\"item\":\"a\",\"t\":3,\"action\":\"vote\",\"response\":0,"
                             "\"polarity\":1,\"order\":[0]}\n"),
                  NonContiguousTime);
  CHECK_THROWS_AS(ingest_str("{\"item\":\"a\",\"t\":1,\"action\":\"write\",\"length\":100}\n"
                             "{\"item\":\"a\",\"t\":1,\"action\":\"write\",\"length\":50}\n"),
                  NonContiguousTime);
}

TEST_CASE("dangling votes are rejected") {
  CHECK_THROWS_AS(ingest_str("{\"item\":\"a\",\"t\":1,\"action\":\"write\",\"length\":100}\n"
                             "{\"item\":\"a\",\"t\":2,\"action\":\"vote\",\"response\":5,"
                             "\"polarity\":1,\"order\":[0]}\n"),
                  DanglingVote);
}

TEST_CASE("display order must be a permutation of existing responses") {
  CHECK_THROWS_AS(ingest_str("{\"item\":\"a\",\"t\":1,\"action\":\"write\",\"length\":100}\n"
                             "{\"item\":\"a\",\"t\":2,\"action\":\"vote\",\"response\":0,"
                             "\"polarity\":1,\"order\":[1]}\n"),
                  BadDisplayOrder);
  CHECK_THROWS_AS(ingest_str("{\"item\":\"a\",\"t\":1,\"action\":\"write\",\"length\":100}\n"
                             "{\"item\":\"a\",\"t\":2,\"action\":\"write\",\"length\":50,\"order\":[]}\n"
                             "{\"item\":\"a\",\"t\":3,\"action\":\"vote\",\"response\":0,"
                             "\"polarity\":1,\"order\":[0,0]}\n"),
                  BadDisplayOrder);
}

TEST_CASE("malformed records carry context") {
  // invalid JSON
  CHECK_THROWS_AS(ingest_str("{nope\n"), MalformedRecord);
  // unknown action
  CHECK_THROWS_AS(ingest_str("{\"item\":\"a\",\"t\":1,\"action\":\"delete\",\"length\":3}\n"),
                  MalformedRecord);
  // zero-length write
  CHECK_THROWS_AS(ingest_str("{\"item\":\"a\",\"t\":1,\"action\":\"write\",\"length\":0}\n"),
                  MalformedRecord);
  // bad polarity
  CHECK_THROWS_AS(ingest_str("{\"item\":\"a\",\"t\":1,\"action\":\"write\",\"length\":9}\n"
                             "{\"item\":\"a\",\"t\":2,\"action\":\"vote\",\"response\":0,"
                             "\"polarity\":2,\"order\":[0]}\n"),
                  MalformedRecord);
  // vote without order
  CHECK_THROWS_AS(ingest_str("{\"item\":\"a\",\"t\":1,\"action\":\"write\",\"length\":9}\n"
                             "{\"item\":\"a\",\"t\":2,\"action\":\"vote\",\"response\":0,"
                             "\"polarity\":1}\n"),
                  MalformedRecord);
  // unknown field
  CHECK_THROWS_AS(ingest_str("{\"item\":\"a\",\"t\":1,\"action\":\"write\",\"length\":9,\"x\":1}\n"),
                  MalformedRecord);
  // first event must be a write
  CHECK_THROWS_AS(ingest_str("{\"item\":\"a\",\"t\":1,\"action\":\"vote\",\"response\":0,"
                             "\"polarity\":1,\"order\":[]}\n"),
                  MalformedRecord);
  // error message names the record
  try {
    ingest_str("{\"item\":\"a\",\"t\":1,\"action\":\"write\",\"length\":100}\n"
               "{\"item\":\"a\",\"t\":3,\"action\":\"write\",\"length\":7}\n");
    CHECK(false);
  } catch (const NonContiguousTime& e) {
    const std::string msg = e.what();
    CHECK(msg.find("'a'") != std::string::npos);
    CHECK(msg.find("t=3") != std::string::npos);
    CHECK(msg.find("line 2") != std::string::npos);
  }
}

TEST_CASE("items may interleave; votes identity holds") {
  const auto ds = ingest_str(
      "{\"item\":\"a\",\"t\":1,\"action\":\"write\",\"length\":10}\n"
      "{\"item\":\"b\",\"t\":1,\"action\":\"write\",\"length\":20}\n"
      "{\"item\":\"a\",\"t\":2,\"action\":\"vote\",\"response\":0,\"polarity\":0,\"order\":[0]}\n"
      "{\"item\":\"b\",\"t\":2,\"action\":\"write\",\"length\":30,\"order\":[0]}\n"
      "{\"item\":\"b\",\"t\":3,\"action\":\"vote\",\"response\":1,\"polarity\":1,\"order\":[1,0]}\n");
  REQUIRE(ds.m() == 2);
  std::int64_t expect = 0;
  for (const auto& item : ds.items) expect += item.T() - item.j_final();
  CHECK(ds.n_votes() == expect);
  // global order is preserved through seq
  CHECK(ds.items[0].events[1].seq == 2);
  CHECK(ds.items[1].events[1].seq == 3);
}

TEST_CASE("canonical round trip is byte-exact") {
  const std::string canonical =
      "{\"item\":\"a\",\"t\":1,\"action\":\"write\",\"length\":100}\n"
      "{\"item\":\"b\",\"t\":1,\"action\":\"write\",\"length\":55}\n"
      "{\"item\":\"a\",\"t\":2,\"action\":\"vote\",\"response\":0,\"polarity\":1,\"order\":[0]}\n"
      "{\"item\":\"a\",\"t\":3,\"action\":\"write\",\"length\":20,\"order\":[0]}\n"
      "{\"item\":\"a\",\"t\":4,\"action\":\"gap\",\"votes_missing\":2}\n"
      "{\"item\":\"a\",\"t\":5,\"action\":\"vote\",\"response\":1,\"polarity\":0,\"order\":[0,1]}\n";
  const auto ds = ingest_str(canonical);
  CHECK(serialize_event_log(ds) == canonical);
  // and a second pass stays fixed
  const auto ds2 = ingest_str(serialize_event_log(ds));
  CHECK(serialize_event_log(ds2) == canonical);
}

TEST_CASE("metadata sidecar validation") {
  auto ds = ingest_str(
      "{\"item\":\"a\",\"t\":1,\"action\":\"write\",\"length\":10}\n"
      "{\"item\":\"a\",\"t\":2,\"action\":\"vote\",\"response\":0,\"polarity\":1,\"order\":[0]}\n");

  SUBCASE("valid rows attach") {
    attach_str(ds, "{\"item\":\"a\",\"response\":0,\"comment_count\":3,\"avg_sentiment\":1.25,"
                   "\"group_tag\":\"g0\"}\n");
    REQUIRE(ds.metadata.size() == 1);
    CHECK(ds.metadata[0].comment_count == 3);
    CHECK(*ds.metadata[0].avg_sentiment == doctest::Approx(1.25));
    CHECK(ds.metadata[0].group_tag == "g0");
    const std::string round = serialize_metadata(ds);
    Dataset ds2 = ds;
    ds2.metadata.clear();
    attach_str(ds2, round);
    CHECK(serialize_metadata(ds2) == round);
  }
  SUBCASE("unknown item rejected") {
    CHECK_THROWS_AS(attach_str(ds, "{\"item\":\"zz\",\"response\":0,\"comment_count\":1}\n"),
                    MalformedRecord);
  }
  SUBCASE("unknown response rejected") {
    CHECK_THROWS_AS(attach_str(ds, "{\"item\":\"a\",\"response\":7,\"comment_count\":1}\n"),
                    MalformedRecord);
  }
  SUBCASE("sentiment range enforced") {
    CHECK_THROWS_AS(attach_str(ds, "{\"item\":\"a\",\"response\":0,\"comment_count\":1,"
                                   "\"avg_sentiment\":9.0}\n"),
                    MalformedRecord);
  }
  SUBCASE("duplicate rows rejected") {
    CHECK_THROWS_AS(attach_str(ds, "{\"item\":\"a\",\"response\":0,\"comment_count\":1}\n"
                                   "{\"item\":\"a\",\"response\":0,\"comment_count\":2}\n"),
                    MalformedRecord);
  }
}
