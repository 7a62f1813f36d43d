// Copyright 2026 The concern-miner Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cmine/common.h"
#include "cmine/corpus.h"
#include "doctest.h"
#include "support.h"

namespace cmine::corpus {
namespace {

using testing::MakeReview;
using testing::TempDir;
using testing::WriteText;

TEST_CASE("rng is deterministic and samples distinct indices") {
  Rng a(11), b(11);
  for (int i = 0; i < 100; ++i) CHECK(a.NextU64() == b.NextU64());
  Rng r(3);
  std::vector<size_t> s = r.SampleIndices(50, 20);
  CHECK(s.size() == 20);
  CHECK(std::set<size_t>(s.begin(), s.end()).size() == 20);
  for (size_t x : s) CHECK(x < 50);
  CHECK(DeriveSeed(1, 2) != DeriveSeed(1, 3));
  CHECK(DeriveSeed(1, 2) == DeriveSeed(1, 2));
}

TEST_CASE("round half up on exact ratios") {
  CHECK(RoundHalfUpRatio(1, 8, 100) == 13);   // 12.5 -> 13
  CHECK(RoundHalfUpRatio(1, 3, 100) == 33);
  CHECK(RoundHalfUpRatio(2, 3, 100) == 67);
  CHECK(RoundHalfUpRatio(0, 7, 10000) == 0);
}

TEST_CASE("sha256 of known input") {
  CHECK(Sha256Hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("ingest jsonl keeps file order") {
  TempDir dir;
  WriteText(dir / "r.jsonl",
            "{\"id\":\"a\",\"app_id\":\"x\",\"category\":\"tools\",\"body\":\"one\"}\n"
            "{\"id\":\"b\",\"app_id\":\"x\",\"category\":\"tools\",\"body\":\"two\","
            "\"rating\":3,\"owner_response\":\"thanks\"}\n"
            "{\"id\":\"c\",\"app_id\":\"y\",\"category\":\"social\",\"body\":\"three\"}\n");
  std::vector<Review> r = IngestReviews(dir / "r.jsonl", InputFormat::kJsonl);
  REQUIRE(r.size() == 3);
  CHECK(r[0].id == "a");
  CHECK(r[1].id == "b");
  CHECK(r[2].id == "c");
  CHECK(r[1].rating == 3);
  CHECK(r[1].owner_response == "thanks");
  CHECK(r[0].raw_body == "one");
  CHECK(r[0].body == r[0].raw_body);
}

TEST_CASE("ingest of an empty file is empty") {
  TempDir dir;
  WriteText(dir / "e.jsonl", "");
  CHECK(IngestReviews(dir / "e.jsonl", InputFormat::kJsonl).empty());
  CHECK(ParseCsv("").empty());
}

TEST_CASE("duplicate id error cites the line and id") {
  const std::string content =
      "{\"id\":\"a\",\"app_id\":\"x\",\"category\":\"t\",\"body\":\"one\"}\n"
      "{\"id\":\"a\",\"app_id\":\"x\",\"category\":\"t\",\"body\":\"two\"}\n";
  try {
    ParseJsonl(content);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2") != std::string::npos);
    CHECK(msg.find("'a'") != std::string::npos);
  }
}

TEST_CASE("malformed rows name row and field") {
  try {
    ParseJsonl("{\"id\":\"a\",\"app_id\":\"x\",\"body\":\"one\"}\n");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 1") != std::string::npos);
    CHECK(msg.find("category") != std::string::npos);
  }
  CHECK_THROWS_AS(ParseJsonl("{\"id\":\"a\",\"app_id\":\"x\",\"category\":\"t\","
                             "\"body\":\"b\",\"rating\":9}\n"),
                  DataError);
  CHECK_THROWS_AS(ParseJsonl("not json\n"), DataError);
}

TEST_CASE("csv ingestion with quoting") {
  std::vector<Review> r = ParseCsv(
      "id,app_id,category,body,rating\n"
      "a,x,tools,\"hello, \"\"world\"\"\",4\n"
      "b,x,tools,\"multi\nline\",\n");
  REQUIRE(r.size() == 2);
  CHECK(r[0].raw_body == "hello, \"world\"");
  CHECK(r[0].rating == 4);
  CHECK(r[1].raw_body == "multi\nline");
  CHECK_FALSE(r[1].rating.has_value());
  CHECK_THROWS_AS(ParseCsv("id,app_id,body\na,x,b\n"), DataError);
}

TEST_CASE("jsonl round trip") {
  std::vector<Review> in = {MakeReview("a", "some body"),
                            MakeReview("b", "other body", "social")};
  in[0].rating = 5;
  in[1].owner_response = "sorry";
  std::vector<Review> out = ParseJsonl(ToJsonl(in));
  REQUIRE(out.size() == 2);
  CHECK(out[0].rating == 5);
  CHECK(out[1].owner_response == "sorry");
  CHECK(out[1].category == "social");
}

TEST_CASE("clean text removal rules") {
  CHECK(CleanText("Great app!! 5 stars \xF0\x9F\x99\x82 I love it") ==
        "Great app stars love it");
  CHECK(CleanText("") == "");
  CHECK(CleanText("fair") == "fair");
  CHECK(CleanText("  Costs $5   more!  ") == "Costs more");
}

TEST_CASE("clean text is idempotent on random text") {
  const std::vector<std::string> pieces = {
      "a", "B", "fair", "1", "42", "!", "?!", ",", " ", "  ", "\t", "\n",
      "\xF0\x9F\x99\x82", "\xE2\x9D\xA4", "\xC3\xA9t\xC3\xA9", "$", "\xE2\x82\xAC",
      "don't", "x", "--", "\xE3\x81\x93\xE3\x82\x8C", "10/10", "#", "ok"};
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    std::string s;
    const size_t len = rng.UniformIndex(30);
    for (size_t i = 0; i < len; ++i) s += pieces[rng.UniformIndex(pieces.size())];
    const std::string once = CleanText(s);
    CHECK(CleanText(once) == once);
    for (char c : once) CHECK_FALSE((c >= '0' && c <= '9'));
    for (const std::string& tok : SplitWhitespace(once)) {
      CHECK(utf8::Length(tok) > 1);
    }
  }
}

TEST_CASE("filter reviews by length and language") {
  std::vector<Review> in = {
      MakeReview("short", "good app"),
      MakeReview("en", "this application works really well"),
      MakeReview("ja",
                 "\xE3\x81\x93\xE3\x82\x8C\xE3\x81\xAF\xE6\x9C\xAC\xE5\xBD\x93"
                 "\xE3\x81\xAB \xE3\x81\xA8\xE3\x81\xA6\xE3\x82\x82 "
                 "\xE6\x9C\x80\xE9\xAB\x98 \xE3\x81\x8A\xE3\x81\x99\xE3\x81\x99"
                 "\xE3\x82\x81")};
  FunctionWordDetector detector;
  FilterResult r = FilterReviews(in, 4, &detector);
  REQUIRE(r.kept.size() == 1);
  CHECK(r.kept[0].id == "en");
  REQUIRE(r.dropped.size() == 2);
  std::map<std::string, DropReason> reasons;
  for (const Dropped& d : r.dropped) reasons[d.id] = d.reason;
  CHECK(reasons.at("short") == DropReason::kTooShort);
  CHECK(reasons.at("ja") == DropReason::kNonEnglish);
}

TEST_CASE("filter partitions its input") {
  Rng rng(9);
  const std::vector<std::string> words = {"the", "app", "is", "fair", "good",
                                          "not", "\xC3\xA9t\xC3\xA9", "and"};
  std::vector<Review> in;
  for (int i = 0; i < 200; ++i) {
    std::string body;
    const size_t n = rng.UniformIndex(8);
    for (size_t k = 0; k < n; ++k) body += words[rng.UniformIndex(words.size())] + " ";
    in.push_back(MakeReview("r" + std::to_string(i), body));
  }
  FunctionWordDetector detector;
  FilterResult r = FilterReviews(in, 4, &detector);
  CHECK(r.kept.size() + r.dropped.size() == in.size());
  std::set<std::string> kept;
  for (const Review& k : r.kept) kept.insert(k.id);
  for (const Dropped& d : r.dropped) CHECK_FALSE(kept.contains(d.id));
}

TEST_CASE("sample size fixtures") {
  CHECK(SampleSize(SampleSpec(0.99, 0.02, 4911)) == 2248);
  CHECK(SampleSize(SampleSpec(0.95, 0.05)) == 385);
  const int64_t tiny = SampleSize(SampleSpec(0.90, 0.99));
  CHECK(tiny >= 1);
  CHECK(tiny <= 2);
  CHECK_THROWS_AS(SampleSpec(0.8, 0.05), UsageError);
  CHECK_THROWS_AS(SampleSpec(0.95, 1.0), UsageError);
  CHECK(ZValue(0.99) == doctest::Approx(2.575));
}

TEST_CASE("sample size is monotone") {
  const double confidences[] = {0.90, 0.95, 0.99};
  const double margins[] = {0.01, 0.02, 0.03, 0.05, 0.1, 0.2, 0.5};
  const int64_t populations[] = {10, 100, 1000, 4911, 100000};
  for (double c : confidences) {
    for (size_t m = 0; m + 1 < std::size(margins); ++m) {
      CHECK(SampleSize(SampleSpec(c, margins[m])) >=
            SampleSize(SampleSpec(c, margins[m + 1])));
    }
    for (size_t p = 0; p + 1 < std::size(populations); ++p) {
      CHECK(SampleSize(SampleSpec(c, 0.02, populations[p])) <=
            SampleSize(SampleSpec(c, 0.02, populations[p + 1])));
    }
    CHECK(SampleSize(SampleSpec(c, 0.02, 100000)) <=
          SampleSize(SampleSpec(c, 0.02)));
  }
  for (double m : margins) {
    CHECK(SampleSize(SampleSpec(0.90, m)) <= SampleSize(SampleSpec(0.95, m)));
    CHECK(SampleSize(SampleSpec(0.95, m)) <= SampleSize(SampleSpec(0.99, m)));
  }
}

TEST_CASE("draw sample with a per-app cap") {
  std::vector<Review> in;
  for (int a = 0; a < 40; ++a) {
    for (int i = 0; i < 45 + a % 7; ++i) {
      in.push_back(MakeReview("a" + std::to_string(a) + "-" + std::to_string(i),
                              "body", "tools", "app" + std::to_string(a)));
    }
  }
  std::vector<Review> s = DrawSample(in, 1800, 4, 45);
  REQUIRE(s.size() == 1800);
  std::map<std::string, int> per_app;
  for (const Review& r : s) per_app[r.app_id]++;
  CHECK(per_app.size() == 40);
  for (const auto& [app, n] : per_app) CHECK(n == 45);

  CHECK(DrawSample(in, 0, 4).empty());
  std::vector<Review> again = DrawSample(in, 100, 8);
  std::vector<Review> twice = DrawSample(in, 100, 8);
  for (size_t i = 0; i < again.size(); ++i) CHECK(again[i].id == twice[i].id);
  try {
    DrawSample(in, 1801, 4, 45);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("1800") != std::string::npos);
  }
}

TEST_CASE("labels jsonl parsing") {
  std::vector<LabeledReview> l = ParseLabelsJsonl(
      "{\"review_id\":\"a\",\"labels\":[{\"coder_id\":\"c1\",\"label\":\"fairness\"},"
      "{\"coder_id\":\"c2\",\"label\":\"non_fairness\"}],\"final_label\":\"unresolved\"}\n"
      "{\"review_id\":\"b\",\"labels\":[],\"final_label\":\"fairness\"}\n");
  REQUIRE(l.size() == 2);
  CHECK(l[0].labels.size() == 2);
  CHECK(l[0].final_label == FinalLabel::kUnresolved);
  CHECK(l[1].final_label == FinalLabel::kFairness);
  CHECK(ParseLabelsJsonl(LabelsToJsonl(l)).size() == 2);
  CHECK_THROWS_AS(
      ParseLabelsJsonl("{\"review_id\":\"a\",\"labels\":[],\"final_label\":\"x\"}\n"),
      DataError);
}

}  // namespace
}  // namespace cmine::corpus
