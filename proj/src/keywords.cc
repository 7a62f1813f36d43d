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

#include "cmine/keywords.h"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

namespace cmine::keywords {

using nlohmann::json;

std::string_view OriginName(Origin origin) {
  switch (origin) {
    case Origin::kSeed:
      return "seed";
    case Origin::kExtracted:
      return "extracted";
    case Origin::kManual:
      return "manual";
  }
  return "seed";
}

Origin ParseOrigin(std::string_view name) {
  if (name == "seed") return Origin::kSeed;
  if (name == "extracted") return Origin::kExtracted;
  if (name == "manual") return Origin::kManual;
  throw DataError("unknown keyword origin '" + std::string(name) + "'");
}

std::vector<std::string> Tokenize(std::string_view body) {
  std::vector<std::string> tokens = SplitWhitespace(body);
  for (std::string& t : tokens) t = utf8::ToLower(t);
  return tokens;
}

namespace {

std::string NormalizePhrase(std::string_view phrase) {
  std::vector<std::string> tokens = Tokenize(phrase);
  return Join(tokens, " ");
}

size_t TokenCount(const std::string& phrase) {
  return static_cast<size_t>(std::count(phrase.begin(), phrase.end(), ' ')) + 1;
}

}  // namespace

KeywordSet KeywordSet::FromSeeds(const std::vector<std::string>& seeds) {
  KeywordSet set;
  for (const std::string& s : seeds) set.Add(s, Origin::kSeed);
  return set;
}

bool KeywordSet::Add(std::string phrase, Origin origin) {
  std::string normalized = NormalizePhrase(phrase);
  if (normalized.empty()) throw UsageError("empty keyword");
  if (TokenCount(normalized) > 3) {
    throw UsageError("keyword '" + normalized + "' has more than 3 tokens");
  }
  if (Contains(normalized)) return false;
  keywords_.push_back({std::move(normalized), origin, 0});
  return true;
}

bool KeywordSet::Remove(const std::string& phrase) {
  return std::erase_if(keywords_, [&](const Keyword& k) {
           return k.phrase == phrase;
         }) > 0;
}

bool KeywordSet::Contains(const std::string& phrase) const {
  return std::any_of(keywords_.begin(), keywords_.end(),
                     [&](const Keyword& k) { return k.phrase == phrase; });
}

json KeywordSet::ToJson() const {
  json out = json::array();
  for (const Keyword& k : keywords_) {
    out.push_back({{"phrase", k.phrase},
                   {"origin", OriginName(k.origin)},
                   {"match_count", k.match_count}});
  }
  return out;
}

KeywordSet KeywordSet::FromJson(const json& j) {
  KeywordSet set;
  try {
    for (const json& k : j) {
      std::string phrase = k.at("phrase").get<std::string>();
      if (!set.Add(phrase, ParseOrigin(k.at("origin").get<std::string>()))) {
        throw DataError("duplicate keyword '" + phrase + "'");
      }
      set.keywords_.back().match_count =
          k.value("match_count", static_cast<int64_t>(0));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed keyword set: ") + e.what());
  }
  return set;
}

bool ContainsPhrase(const std::vector<std::string>& tokens,
                    const std::vector<std::string>& phrase_tokens) {
  if (phrase_tokens.empty() || phrase_tokens.size() > tokens.size()) {
    return false;
  }
  return std::search(tokens.begin(), tokens.end(), phrase_tokens.begin(),
                     phrase_tokens.end()) != tokens.end();
}

std::vector<Match> MatchKeywords(const std::vector<corpus::Review>& reviews,
                                 KeywordSet& keyword_set) {
  auto& keywords = keyword_set.mutable_keywords();
  std::vector<std::vector<std::string>> phrase_tokens;
  for (Keyword& k : keywords) {
    phrase_tokens.push_back(Tokenize(k.phrase));
    k.match_count = 0;
  }
  std::vector<Match> matches;
  for (const corpus::Review& review : reviews) {
    std::vector<std::string> tokens = Tokenize(review.body);
    Match match{review.id, {}};
    for (size_t i = 0; i < keywords.size(); ++i) {
      if (ContainsPhrase(tokens, phrase_tokens[i])) {
        match.keywords.push_back(keywords[i].phrase);
        ++keywords[i].match_count;
      }
    }
    if (!match.keywords.empty()) matches.push_back(std::move(match));
  }
  return matches;
}

MatchIndex BuildMatchIndex(const std::vector<corpus::Review>& reviews,
                           const std::vector<std::string>& phrases) {
  MatchIndex index;
  std::vector<std::vector<std::string>> phrase_tokens;
  for (const std::string& p : phrases) {
    index[p];
    phrase_tokens.push_back(Tokenize(p));
  }
  for (const corpus::Review& review : reviews) {
    std::vector<std::string> tokens = Tokenize(review.body);
    for (size_t i = 0; i < phrases.size(); ++i) {
      if (ContainsPhrase(tokens, phrase_tokens[i])) {
        index[phrases[i]].insert(review.id);
      }
    }
  }
  return index;
}

namespace {

// Mean vector of the in-vocabulary tokens; empty if all are OOV.
std::vector<double> PhraseVector(const std::vector<std::string>& tokens,
                                 const features::WordVectorTable& table) {
  std::vector<double> sum(table.dimension(), 0.0);
  size_t hits = 0;
  for (const std::string& t : tokens) {
    auto v = table.Find(t);
    if (v.empty()) continue;
    ++hits;
    for (size_t d = 0; d < sum.size(); ++d) sum[d] += v[d];
  }
  if (hits == 0) return {};
  for (double& x : sum) x /= static_cast<double>(hits);
  return sum;
}

double Cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

}  // namespace

std::vector<KeywordCandidate> ExtractCandidates(
    const std::vector<corpus::Review>& reviews,
    const features::WordVectorTable& word_vectors,
    const std::vector<std::string>& seeds, const ExtractConfig& config) {
  if (reviews.empty()) throw UsageError("candidate extraction needs reviews");
  if (seeds.empty()) throw UsageError("candidate extraction needs seeds");
  if (config.min_ngram < 1 || config.max_ngram > 3 ||
      config.min_ngram > config.max_ngram) {
    throw UsageError("n-gram range must lie within 1..3");
  }
  const size_t dim = word_vectors.dimension();

  std::vector<double> seed_centroid(dim, 0.0);
  for (const std::string& seed : seeds) {
    auto v = PhraseVector(Tokenize(seed), word_vectors);
    if (v.empty()) throw DataError("seed '" + seed + "' is not embeddable");
    for (size_t d = 0; d < dim; ++d) seed_centroid[d] += v[d];
  }
  for (double& x : seed_centroid) x /= static_cast<double>(seeds.size());

  std::vector<double> corpus_centroid(dim, 0.0);
  size_t embedded_docs = 0;
  // Document frequency per phrase and first-appearance order.
  std::unordered_map<std::string, int64_t> df;
  std::vector<std::string> order;
  for (const corpus::Review& review : reviews) {
    std::vector<std::string> tokens = Tokenize(review.body);
    auto doc = PhraseVector(tokens, word_vectors);
    if (!doc.empty()) {
      ++embedded_docs;
      for (size_t d = 0; d < dim; ++d) corpus_centroid[d] += doc[d];
    }
    std::unordered_set<std::string> seen_here;
    for (int n = config.min_ngram; n <= config.max_ngram; ++n) {
      for (size_t i = 0; i + n <= tokens.size(); ++i) {
        bool all_stop = true;
        for (int k = 0; k < n; ++k) {
          all_stop = all_stop && corpus::IsStopWord(tokens[i + k]);
        }
        if (all_stop) continue;
        std::string phrase = Join(std::span(tokens).subspan(i, n), " ");
        if (!seen_here.insert(phrase).second) continue;
        auto [it, inserted] = df.try_emplace(phrase, 0);
        if (inserted) order.push_back(phrase);
        ++it->second;
      }
    }
  }
  if (embedded_docs > 0) {
    for (double& x : corpus_centroid) x /= static_cast<double>(embedded_docs);
  }

  struct Scored {
    KeywordCandidate candidate;
    std::vector<double> vector;
  };
  std::vector<Scored> scored;
  for (const std::string& phrase : order) {
    auto v = PhraseVector(Tokenize(phrase), word_vectors);
    if (v.empty()) continue;
    double relevance = config.seed_weight * Cosine(v, seed_centroid) +
                       (1.0 - config.seed_weight) * Cosine(v, corpus_centroid);
    scored.push_back({{phrase, relevance, df[phrase]}, std::move(v)});
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const Scored& a, const Scored& b) {
                     if (a.candidate.relevance != b.candidate.relevance) {
                       return a.candidate.relevance > b.candidate.relevance;
                     }
                     return a.candidate.phrase < b.candidate.phrase;
                   });

  std::vector<KeywordCandidate> selected;
  std::vector<const std::vector<double>*> selected_vectors;
  for (const Scored& s : scored) {
    if (selected.size() >= config.top_n) break;
    bool redundant = false;
    for (const auto* v : selected_vectors) {
      if (Cosine(s.vector, *v) > config.diversity_threshold) {
        redundant = true;
        break;
      }
    }
    if (redundant) continue;
    selected.push_back(s.candidate);
    selected_vectors.push_back(&s.vector);
  }
  return selected;
}

int64_t RarityThreshold(int64_t corpus_size, double min_fraction) {
  if (!(min_fraction > 0.0 && min_fraction < 1.0)) {
    throw UsageError("min_fraction must lie in (0, 1)");
  }
  const double raw = min_fraction * static_cast<double>(corpus_size);
  auto threshold = static_cast<int64_t>(std::ceil(raw - 1e-9));
  return std::max<int64_t>(threshold, 1);
}

std::vector<KeywordCandidate> PruneRare(
    const std::vector<KeywordCandidate>& candidates, int64_t corpus_size,
    double min_fraction) {
  const int64_t threshold = RarityThreshold(corpus_size, min_fraction);
  std::vector<KeywordCandidate> kept;
  for (const KeywordCandidate& c : candidates) {
    if (c.document_frequency >= threshold) kept.push_back(c);
  }
  return kept;
}

namespace {

// Priority used to break ties between equal match sets.
bool Preferred(const std::string& a, const std::string& b) {
  size_t ta = TokenCount(a), tb = TokenCount(b);
  if (ta != tb) return ta < tb;
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

}  // namespace

std::vector<KeywordCandidate> PruneSubsumed(
    const std::vector<KeywordCandidate>& candidates,
    const MatchIndex& match_index) {
  const size_t n = candidates.size();
  std::vector<const std::set<std::string>*> sets(n);
  for (size_t i = 0; i < n; ++i) {
    auto it = match_index.find(candidates[i].phrase);
    if (it == match_index.end()) {
      throw UsageError("match index does not cover '" + candidates[i].phrase +
                       "'");
    }
    sets[i] = &it->second;
  }
  // A candidate survives iff it is maximal under (set inclusion, priority).
  std::vector<bool> keep(n, true);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n && keep[i]; ++j) {
      if (i == j || candidates[i].phrase == candidates[j].phrase) continue;
      const auto& a = *sets[i];
      const auto& b = *sets[j];
      if (a.size() > b.size()) continue;
      if (!std::includes(b.begin(), b.end(), a.begin(), a.end())) continue;
      if (a.size() < b.size() ||
          Preferred(candidates[j].phrase, candidates[i].phrase)) {
        keep[i] = false;
      }
    }
  }
  std::unordered_set<std::string> unigrams;
  for (size_t i = 0; i < n; ++i) {
    if (keep[i] && TokenCount(candidates[i].phrase) == 1) {
      unigrams.insert(candidates[i].phrase);
    }
  }
  std::vector<KeywordCandidate> kept;
  for (size_t i = 0; i < n; ++i) {
    if (!keep[i]) continue;
    std::vector<std::string> tokens = Tokenize(candidates[i].phrase);
    if (tokens.size() >= 2 &&
        std::any_of(tokens.begin(), tokens.end(),
                    [&](const std::string& t) { return unigrams.contains(t); })) {
      continue;
    }
    kept.push_back(candidates[i]);
  }
  return kept;
}

BootstrapResult BootstrapRound(const std::vector<corpus::Review>& corpus,
                               const KeywordSet& keyword_set,
                               const features::WordVectorTable& word_vectors,
                               const BootstrapConfig& config) {
  if (keyword_set.empty()) throw UsageError("keyword set is empty");
  BootstrapResult result;
  result.keyword_set = keyword_set;

  std::vector<Match> matches = MatchKeywords(corpus, result.keyword_set);
  if (!matches.empty()) {
    std::unordered_set<std::string> matched_ids;
    for (const Match& m : matches) matched_ids.insert(m.review_id);
    std::vector<corpus::Review> potential;
    for (const corpus::Review& r : corpus) {
      if (matched_ids.contains(r.id)) potential.push_back(r);
    }
    std::vector<std::string> seeds;
    for (const Keyword& k : result.keyword_set.keywords()) {
      if (k.origin == Origin::kSeed) seeds.push_back(k.phrase);
    }
    if (seeds.empty()) {
      for (const Keyword& k : result.keyword_set.keywords()) {
        seeds.push_back(k.phrase);
      }
    }
    std::vector<KeywordCandidate> candidates =
        ExtractCandidates(potential, word_vectors, seeds, config.extract);

    // Existing keywords compete on equal terms with the new candidates.
    std::vector<KeywordCandidate> pool;
    std::unordered_set<std::string> in_pool;
    for (const Keyword& k : result.keyword_set.keywords()) {
      pool.push_back({k.phrase, 1.0, 0});
      in_pool.insert(k.phrase);
    }
    for (const KeywordCandidate& c : candidates) {
      if (in_pool.insert(c.phrase).second) pool.push_back(c);
    }
    std::vector<std::string> phrases;
    for (const KeywordCandidate& c : pool) phrases.push_back(c.phrase);
    MatchIndex index = BuildMatchIndex(corpus, phrases);
    for (KeywordCandidate& c : pool) {
      c.document_frequency = static_cast<int64_t>(index[c.phrase].size());
    }
    std::vector<KeywordCandidate> survivors =
        PruneSubsumed(PruneRare(pool, static_cast<int64_t>(corpus.size()),
                                config.min_fraction),
                      index);
    std::unordered_set<std::string> surviving;
    for (const KeywordCandidate& c : survivors) surviving.insert(c.phrase);

    KeywordSet updated;
    for (const Keyword& k : result.keyword_set.keywords()) {
      // Seeds stay unless removed by hand.
      if (k.origin == Origin::kSeed || surviving.contains(k.phrase)) {
        updated.Add(k.phrase, k.origin);
      }
    }
    for (const KeywordCandidate& c : survivors) {
      updated.Add(c.phrase, Origin::kExtracted);
    }
    result.keyword_set = std::move(updated);
    matches = MatchKeywords(corpus, result.keyword_set);
  }

  std::unordered_map<std::string, std::vector<std::string>> by_keyword;
  for (const Match& m : matches) {
    result.potential_reviews.push_back(m.review_id);
    for (const std::string& k : m.keywords) by_keyword[k].push_back(m.review_id);
  }
  Rng rng(config.seed);
  std::unordered_set<std::string> batched;
  for (const Keyword& k : result.keyword_set.keywords()) {
    auto it = by_keyword.find(k.phrase);
    if (it == by_keyword.end()) continue;
    const std::vector<std::string>& ids = it->second;
    size_t take = std::min(config.per_keyword_sample, ids.size());
    std::vector<size_t> picks = rng.SampleIndices(ids.size(), take);
    std::sort(picks.begin(), picks.end());
    for (size_t p : picks) {
      if (batched.insert(ids[p]).second) result.labeling_batch.push_back(ids[p]);
    }
  }
  return result;
}

}  // namespace cmine::keywords
