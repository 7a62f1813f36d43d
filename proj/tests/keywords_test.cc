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

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "cmine/keywords.h"
#include "cmine/synthetic.h"
#include "doctest.h"
#include "support.h"

namespace cmine::keywords {
namespace {

using corpus::Review;
using testing::MakeReview;

std::set<std::string> Phrases(const std::vector<KeywordCandidate>& c) {
  std::set<std::string> out;
  for (const KeywordCandidate& k : c) out.insert(k.phrase);
  return out;
}

KeywordCandidate Candidate(std::string phrase, int64_t df = 1) {
  return {std::move(phrase), 0.5, df};
}

features::WordVectorTable ToyVectors() {
  features::WordVectorTable t(3);
  auto add = [&](const char* w, float a, float b, float c) {
    const float v[3] = {a, b, c};
    t.Add(w, v);
  };
  add("fair", 1.0f, 0.0f, 0.0f);
  add("unfair", 0.9f, 0.3f, 0.0f);
  add("ban", 0.1f, 1.0f, 0.0f);
  add("nice", 0.0f, 0.1f, 1.0f);
  add("colors", 0.0f, 0.3f, 1.0f);
  add("price", 0.2f, 0.8f, 0.2f);
  return t;
}

TEST_CASE("keyword set normalizes and rejects bad phrases") {
  KeywordSet s = KeywordSet::FromSeeds({"Fair", "discrimination", "bias"});
  CHECK(s.size() == 3);
  CHECK(s.Contains("fair"));
  CHECK_FALSE(s.Add("FAIR", Origin::kManual));
  CHECK(s.Add("fair  policy", Origin::kManual));
  CHECK(s.Contains("fair policy"));
  CHECK_THROWS_AS(s.Add("a b c d", Origin::kManual), UsageError);
  CHECK_THROWS_AS(s.Add("   ", Origin::kManual), UsageError);
  KeywordSet back = KeywordSet::FromJson(s.ToJson());
  CHECK(back.ToJson() == s.ToJson());
}

TEST_CASE("matching respects token boundaries") {
  std::vector<Review> reviews = {MakeReview("a", "this is so unfair and biased"),
                                 MakeReview("b", "totally fair decision"),
                                 MakeReview("c", "Fair Policy here")};
  KeywordSet set;
  set.Add("fair", Origin::kSeed);
  set.Add("bias", Origin::kSeed);
  set.Add("fair policy", Origin::kManual);
  std::vector<Match> m = MatchKeywords(reviews, set);
  REQUIRE(m.size() == 2);
  CHECK(m[0].review_id == "b");
  CHECK(m[0].keywords == std::vector<std::string>{"fair"});
  CHECK(m[1].review_id == "c");
  CHECK(m[1].keywords == std::vector<std::string>{"fair", "fair policy"});
  CHECK(set.keywords()[0].match_count == 2);
  CHECK(set.keywords()[1].match_count == 0);

  KeywordSet empty;
  CHECK(MatchKeywords(reviews, empty).empty());
}

TEST_CASE("matches are re-verifiable by direct token scan") {
  const std::vector<std::string> vocab = {"fair", "unfair", "policy", "ban",
                                          "the", "app", "price"};
  Rng rng(21);
  std::vector<Review> reviews;
  for (int i = 0; i < 300; ++i) {
    std::string body;
    for (size_t k = 0, n = 1 + rng.UniformIndex(8); k < n; ++k) {
      body += vocab[rng.UniformIndex(vocab.size())] + " ";
    }
    reviews.push_back(MakeReview("r" + std::to_string(i), body));
  }
  KeywordSet set;
  set.Add("fair", Origin::kSeed);
  set.Add("fair policy", Origin::kManual);
  set.Add("the app price", Origin::kManual);
  std::vector<Match> matches = MatchKeywords(reviews, set);
  std::set<std::string> ids;
  for (const Review& r : reviews) ids.insert(r.id);
  size_t cursor = 0;
  for (const Review& r : reviews) {
    std::vector<std::string> tokens = Tokenize(r.body);
    std::vector<std::string> expected;
    for (const Keyword& k : set.keywords()) {
      std::vector<std::string> p = Tokenize(k.phrase);
      bool found = false;
      for (size_t i = 0; i + p.size() <= tokens.size() && !found; ++i) {
        found = std::equal(p.begin(), p.end(), tokens.begin() + i);
      }
      if (found) expected.push_back(k.phrase);
    }
    if (expected.empty()) continue;
    REQUIRE(cursor < matches.size());
    CHECK(matches[cursor].review_id == r.id);
    CHECK(matches[cursor].keywords == expected);
    CHECK(ids.contains(matches[cursor].review_id));
    ++cursor;
  }
  CHECK(cursor == matches.size());
}

TEST_CASE("extraction ranks seed-like phrases first") {
  features::WordVectorTable t = ToyVectors();
  std::vector<Review> reviews = {MakeReview("a", "unfair ban"),
                                 MakeReview("b", "nice colors")};
  std::vector<KeywordCandidate> c = ExtractCandidates(reviews, t, {"fair"});
  auto rank = [&](const std::string& p) {
    for (size_t i = 0; i < c.size(); ++i) {
      if (c[i].phrase == p) return static_cast<int>(i);
    }
    return -1;
  };
  REQUIRE(rank("unfair") >= 0);
  REQUIRE(rank("colors") >= 0);
  CHECK(rank("unfair") < rank("colors"));
  for (const KeywordCandidate& k : c) {
    CHECK(std::isfinite(k.relevance));
    CHECK(k.document_frequency == 1);
  }
  CHECK_THROWS_AS(ExtractCandidates(reviews, t, {"justice"}), DataError);
}

TEST_CASE("a candidate equal to a seed scores lambda plus the corpus term") {
  features::WordVectorTable t = ToyVectors();
  std::vector<Review> reviews = {MakeReview("a", "fair price"),
                                 MakeReview("b", "nice colors")};
  ExtractConfig config;
  config.diversity_threshold = 1.0;
  std::vector<KeywordCandidate> c = ExtractCandidates(reviews, t, {"fair"}, config);
  // Corpus centroid: mean of the two document vectors.
  const double d1[3] = {0.6, 0.4, 0.1}, d2[3] = {0.0, 0.2, 1.0};
  const double centroid[3] = {(d1[0] + d2[0]) / 2, (d1[1] + d2[1]) / 2,
                              (d1[2] + d2[2]) / 2};
  const double norm = std::sqrt(centroid[0] * centroid[0] +
                                centroid[1] * centroid[1] +
                                centroid[2] * centroid[2]);
  const double expected = 0.7 + 0.3 * centroid[0] / norm;
  bool seen = false;
  for (const KeywordCandidate& k : c) {
    if (k.phrase != "fair") continue;
    seen = true;
    CHECK(k.relevance == doctest::Approx(expected).epsilon(1e-6));
    CHECK(k.relevance <= 1.0);
  }
  CHECK(seen);
}

TEST_CASE("diversity threshold 1 keeps pure relevance order") {
  features::WordVectorTable t = ToyVectors();
  std::vector<Review> reviews = {MakeReview("a", "unfair ban fair price"),
                                 MakeReview("b", "nice colors fair")};
  ExtractConfig config;
  config.diversity_threshold = 1.0;
  std::vector<KeywordCandidate> all = ExtractCandidates(reviews, t, {"fair"}, config);
  for (size_t i = 1; i < all.size(); ++i) {
    CHECK(all[i - 1].relevance >= all[i].relevance);
  }
  config.diversity_threshold = 0.5;
  std::vector<KeywordCandidate> diverse =
      ExtractCandidates(reviews, t, {"fair"}, config);
  CHECK(diverse.size() < all.size());
  CHECK(ExtractCandidates(reviews, t, {"fair"}, config).size() == diverse.size());
}

TEST_CASE("rarity threshold at the reference corpus size") {
  CHECK(RarityThreshold(9475506, 0.00001) == 95);
  std::vector<KeywordCandidate> c = {Candidate("a", 94), Candidate("b", 95),
                                     Candidate("c", 0)};
  CHECK(Phrases(PruneRare(c, 9475506)) == std::set<std::string>{"b"});
  std::vector<KeywordCandidate> low = {Candidate("a", 1), Candidate("z", 0)};
  CHECK(Phrases(PruneRare(low, 1000, 1e-12)) == std::set<std::string>{"a"});
}

TEST_CASE("subsumption fixtures") {
  MatchIndex index = {{"fair", {"1", "2", "3"}}, {"fair policy", {"1"}}};
  CHECK(Phrases(PruneSubsumed({Candidate("fair"), Candidate("fair policy")},
                              index)) == std::set<std::string>{"fair"});
  // The unigram rule alone, with unrelated match sets.
  MatchIndex odd = {{"fair", {"1"}}, {"fair policy", {"2"}}};
  CHECK(Phrases(PruneSubsumed({Candidate("fair"), Candidate("fair policy")},
                              odd)) == std::set<std::string>{"fair"});
  MatchIndex ab = {{"a", {"1", "2"}}, {"b", {"1", "2", "3"}}};
  CHECK(Phrases(PruneSubsumed({Candidate("a"), Candidate("b")}, ab)) ==
        std::set<std::string>{"b"});
  MatchIndex disjoint = {{"a", {"1"}}, {"b", {"2"}}, {"c d", {"3"}}};
  CHECK(Phrases(PruneSubsumed({Candidate("a"), Candidate("b"), Candidate("c d")},
                              disjoint)) ==
        std::set<std::string>{"a", "b", "c d"});
  MatchIndex equal = {{"zz", {"1"}}, {"ab cd", {"1"}}, {"aa", {"1"}}};
  CHECK(Phrases(PruneSubsumed({Candidate("zz"), Candidate("ab cd"),
                               Candidate("aa")},
                              equal)) == std::set<std::string>{"aa"});
}

TEST_CASE("pruning is contractive, idempotent and only drops subsumed phrases") {
  const std::vector<std::string> vocab = {"fair", "unfair", "policy", "ban",
                                          "price", "region", "account"};
  Rng rng(33);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<Review> reviews;
    for (int i = 0; i < 40; ++i) {
      std::string body;
      for (size_t k = 0, n = 1 + rng.UniformIndex(6); k < n; ++k) {
        body += vocab[rng.UniformIndex(vocab.size())] + " ";
      }
      reviews.push_back(MakeReview("r" + std::to_string(i), body));
    }
    std::vector<KeywordCandidate> candidates;
    std::set<std::string> used;
    for (int c = 0; c < 10; ++c) {
      std::string phrase = vocab[rng.UniformIndex(vocab.size())];
      if (rng.UniformDouble() < 0.5) phrase += " " + vocab[rng.UniformIndex(vocab.size())];
      if (used.insert(phrase).second) candidates.push_back(Candidate(phrase));
    }
    std::vector<std::string> phrases(used.begin(), used.end());
    MatchIndex index = BuildMatchIndex(reviews, phrases);
    for (KeywordCandidate& c : candidates) {
      c.document_frequency = static_cast<int64_t>(index[c.phrase].size());
    }

    std::vector<KeywordCandidate> kept = PruneSubsumed(candidates, index);
    std::set<std::string> kept_set = Phrases(kept);
    for (const std::string& p : kept_set) CHECK(used.contains(p));
    CHECK(Phrases(PruneSubsumed(kept, index)) == kept_set);
    std::vector<KeywordCandidate> rare = PruneRare(candidates, 40, 0.05);
    CHECK(Phrases(PruneRare(rare, 40, 0.05)) == Phrases(rare));

    for (const KeywordCandidate& c : candidates) {
      if (kept_set.contains(c.phrase)) continue;
      const auto& mine = index[c.phrase];
      bool subsumed = false;
      for (const std::string& other : kept_set) {
        const auto& theirs = index[other];
        subsumed = subsumed || std::includes(theirs.begin(), theirs.end(),
                                             mine.begin(), mine.end());
      }
      bool has_unigram = false;
      for (const std::string& t : Tokenize(c.phrase)) {
        has_unigram = has_unigram || (kept_set.contains(t) && t != c.phrase);
      }
      CHECK((subsumed || has_unigram));
    }
  }
}

TEST_CASE("bootstrap round on a seed matching nothing") {
  features::WordVectorTable t = ToyVectors();
  std::vector<Review> reviews = {MakeReview("a", "nice colors here")};
  KeywordSet seeds = KeywordSet::FromSeeds({"fair"});
  BootstrapResult r = BootstrapRound(reviews, seeds, t);
  CHECK(r.keyword_set.ToJson().dump() == seeds.ToJson().dump());
  CHECK(r.potential_reviews.empty());
  CHECK(r.labeling_batch.empty());
}

TEST_CASE("bootstrap round is byte-identical across runs") {
  synthetic::SyntheticConfig sc;
  sc.num_reviews = 1200;
  sc.reviews_per_topic = 60;
  sc.labeled = 100;
  sc.labeled_fairness = 40;
  synthetic::SyntheticCorpus corpus = synthetic::Generate(sc);
  std::vector<Review> reviews = corpus.reviews;
  corpus::CleanAll(reviews);
  KeywordSet seeds = KeywordSet::FromSeeds(corpus.seed_keywords);
  BootstrapConfig config;
  config.seed = 17;
  BootstrapResult a = BootstrapRound(reviews, seeds, corpus.word_vectors, config);
  BootstrapResult b = BootstrapRound(reviews, seeds, corpus.word_vectors, config);
  CHECK(a.keyword_set.ToJson().dump() == b.keyword_set.ToJson().dump());
  CHECK(a.potential_reviews == b.potential_reviews);
  CHECK(a.labeling_batch == b.labeling_batch);
  CHECK(a.keyword_set.size() >= seeds.size());
  for (const std::string& s : corpus.seed_keywords) {
    CHECK(a.keyword_set.Contains(s));
  }
  std::set<std::string> batch(a.labeling_batch.begin(), a.labeling_batch.end());
  CHECK(batch.size() == a.labeling_batch.size());
  CHECK(a.labeling_batch.size() <= a.keyword_set.size() * config.per_keyword_sample);
}

}  // namespace
}  // namespace cmine::keywords
