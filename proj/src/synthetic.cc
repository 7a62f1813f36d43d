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

#include "cmine/synthetic.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "cmine/common.h"
#include "json.hpp"

namespace cmine::synthetic {

namespace {

const std::vector<std::string> kStopWords = {
    "the", "this", "it", "is", "and", "to", "for", "my", "with", "of",
    "was", "on", "but", "they", "me", "you", "not", "so", "have", "are"};

const std::vector<std::string> kBackground = {
    "app", "great", "love", "update", "crash", "battery", "screen", "game",
    "level", "music", "photo", "camera", "video", "download", "install",
    "easy", "simple", "nice", "good", "bad", "slow", "fast", "design",
    "interface", "useful", "helpful", "friend", "chat", "message",
    "notification", "settings", "option", "theme", "color", "dark", "mode",
    "sound", "quality", "work", "works", "working", "time", "daily", "using",
    "best", "awesome", "cool", "amazing", "perfect", "problem", "issue", "bug",
    "fix", "fixed", "please", "thanks", "stars", "rating", "recommend",
    "enjoy", "fun", "play", "playing", "song", "playlist", "map", "route",
    "trip", "hotel", "order", "food", "delivery", "restaurant", "lesson",
    "learn", "study", "workout", "sleep", "budget", "bank", "card", "login",
    "password", "email", "sync", "backup", "storage", "file", "folder",
    "share", "upload", "widget", "keyboard", "font", "wallpaper", "icon",
    "loading", "freeze", "lag", "smooth", "stable", "phone", "tablet", "new",
    "latest", "month", "week", "year", "day", "really", "very", "much",
    "still", "again", "every", "helps", "makes", "since"};

const std::vector<std::string> kTopicNames = {
    "regional pricing", "account bans", "platform disparity"};

const std::vector<std::vector<std::string>> kTopicWords = {
    {"price", "prices", "charged", "charge", "expensive", "region", "country",
     "currency", "subscription", "premium", "pay", "paying", "cost", "costs",
     "dollars", "local", "overpriced", "discount", "countries", "pricing"},
    {"banned", "ban", "suspended", "account", "blocked", "appeal",
     "moderator", "moderators", "reported", "warning", "permanently",
     "deleted", "removed", "violation", "guidelines", "support",
     "explanation", "reason", "bans", "suspension"},
    {"android", "iphone", "ios", "platform", "platforms", "features",
     "missing", "gets", "first", "behind", "exclusive", "devices", "rollout",
     "left", "owners", "ipad", "apple", "samsung", "release", "months"}};

const std::vector<std::string> kMarkers = {
    "unfair", "unfairly", "fair", "discrimination", "discriminate", "biased",
    "bias", "unjust", "unequal", "treated", "differently", "favoritism",
    "injustice", "equally", "double", "standard"};

const std::vector<std::string> kCategories = {
    "Communication", "Social", "Tools", "Entertainment",
    "Productivity", "Photography", "Shopping", "Travel & Local"};

const std::vector<std::string> kResponses = {
    "Thanks for the feedback, our team is looking into this.",
    "Hi, we are sorry for the trouble. Please contact support so we can help.",
    "We appreciate your review and will pass it on to the product team.",
    "Sorry to hear that. The next update should address this issue.",
    "Thank you for reaching out, we have shared your concern with the team."};

const std::vector<std::string> kShortBodies = {"Love it!", "Great app",
                                               "Nice 👍", "Works well."};
const std::vector<std::string> kForeignBodies = {
    "excelente aplicación muy buena gracias siempre funciona",
    "очень хорошее приложение всем советую спасибо большое",
    "sehr gute anwendung immer schnell danke schön"};

template <typename T>
const T& Pick(Rng& rng, const std::vector<T>& items) {
  return items[rng.UniformIndex(items.size())];
}

struct Draft {
  int topic = -1;  // planted topic, -1 background
  bool hard = false;
  int hard_topic = -1;
  bool short_body = false;
  bool foreign = false;
};

std::string Compose(Rng& rng, std::vector<std::string> tokens) {
  rng.Shuffle(tokens);
  std::string body;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) body += (rng.UniformDouble() < 0.08) ? ", " : " ";
    body += tokens[i];
  }
  if (!body.empty() && body[0] >= 'a' && body[0] <= 'z') body[0] -= 32;
  const double r = rng.UniformDouble();
  if (r < 0.1) {
    body += " 😡";
  } else if (r < 0.2) {
    body += " 10/10";
  } else if (r < 0.6) {
    body += ".";
  } else {
    body += "!";
  }
  return body;
}

void AddWords(Rng& rng, std::vector<std::string>& tokens,
              const std::vector<std::string>& pool, size_t lo, size_t hi) {
  const size_t n = lo + rng.UniformIndex(hi - lo + 1);
  for (size_t i = 0; i < n; ++i) tokens.push_back(Pick(rng, pool));
}

std::string Body(Rng& rng, const Draft& d) {
  if (d.short_body) return Pick(rng, kShortBodies);
  if (d.foreign) return Pick(rng, kForeignBodies);
  std::vector<std::string> tokens;
  AddWords(rng, tokens, kStopWords, 3, 5);
  if (d.topic >= 0) {
    AddWords(rng, tokens, kMarkers, 2, 3);
    AddWords(rng, tokens, kTopicWords[d.topic], 4, 6);
    AddWords(rng, tokens, kBackground, 1, 3);
  } else if (d.hard) {
    AddWords(rng, tokens, kTopicWords[d.hard_topic], 3, 5);
    AddWords(rng, tokens, kBackground, 3, 5);
    if (rng.UniformDouble() < 0.3) tokens.push_back("fair");
  } else {
    AddWords(rng, tokens, kBackground, 5, 10);
    if (rng.UniformDouble() < 0.15) tokens.push_back("don't");
  }
  return Compose(rng, std::move(tokens));
}

std::vector<float> GaussianVector(Rng& rng, size_t dim, double scale) {
  std::vector<float> v(dim);
  for (float& x : v) x = static_cast<float>(rng.Normal() * scale);
  return v;
}

std::string Slug(const std::string& category) {
  std::string s;
  for (char c : category) {
    if (c >= 'A' && c <= 'Z') {
      s += static_cast<char>(c + 32);
    } else if (c >= 'a' && c <= 'z') {
      s += c;
    }
  }
  return s;
}

}  // namespace

SyntheticCorpus Generate(const SyntheticConfig& config) {
  const size_t topics = kTopicNames.size();
  if (config.num_reviews < topics * config.reviews_per_topic + 100) {
    throw UsageError("synthetic corpus too small for the planted topics");
  }
  if (config.sentence_dimension < topics + 1) {
    throw UsageError("sentence dimension too small");
  }
  Rng layout(DeriveSeed(config.seed, 1));
  Rng text(DeriveSeed(config.seed, 2));
  Rng vectors(DeriveSeed(config.seed, 3));
  Rng labeling(DeriveSeed(config.seed, 4));

  std::vector<Draft> drafts(config.num_reviews);
  size_t next = 0;
  for (size_t t = 0; t < topics; ++t) {
    for (size_t i = 0; i < config.reviews_per_topic; ++i) {
      drafts[next++].topic = static_cast<int>(t);
    }
  }
  const size_t background = config.num_reviews - next;
  for (size_t i = 0; i < background; ++i) {
    Draft& d = drafts[next++];
    const double r = layout.UniformDouble();
    if (r < 0.10) {
      d.hard = true;
      d.hard_topic = static_cast<int>(layout.UniformIndex(topics));
    } else if (r < 0.11) {
      d.short_body = true;
    } else if (r < 0.115) {
      d.foreign = true;
    }
  }
  layout.Shuffle(drafts);

  std::vector<std::string> apps;
  std::vector<std::string> app_category;
  for (const std::string& c : kCategories) {
    for (int a = 0; a < 6; ++a) {
      apps.push_back("com.example." + Slug(c) + ".app" + std::to_string(a));
      app_category.push_back(c);
    }
  }

  SyntheticCorpus out;
  out.topic_names = kTopicNames;
  out.seed_keywords = {"unfair", "discrimination", "biased"};
  out.sentence_embeddings = features::SentenceEmbeddingMatrix(config.sentence_dimension);
  const double noise = 0.025;
  for (size_t i = 0; i < drafts.size(); ++i) {
    const Draft& d = drafts[i];
    char id[32];
    std::snprintf(id, sizeof id, "r%05zu", i + 1);
    corpus::Review r;
    r.id = id;
    const size_t app = text.UniformIndex(apps.size());
    r.app_id = apps[app];
    r.category = app_category[app];
    r.raw_body = Body(text, d);
    r.body = r.raw_body;
    r.rating = d.topic >= 0 ? 1 + static_cast<int>(text.UniformIndex(2))
                            : 2 + static_cast<int>(text.UniformIndex(4));
    if (text.UniformDouble() < (d.topic >= 0 ? 0.3 : 0.2)) {
      r.owner_response = Pick(text, kResponses);
    }
    out.topic_of[r.id] = d.topic;

    // Topics sit on orthogonal axes, equidistant from each other and from
    // the background axis; partial-topic negatives sit halfway.
    std::vector<float> e =
        GaussianVector(vectors, config.sentence_dimension, noise);
    if (d.topic >= 0) {
      e[d.topic] += 1.0f;
    } else if (d.hard) {
      e[d.hard_topic] += 0.5f;
      e[topics] += 0.5f;
    } else {
      e[topics] += 1.0f;
    }
    out.sentence_embeddings.Add(r.id, e);
    out.reviews.push_back(std::move(r));
  }

  // Word vectors: one random center per word group, words scattered around.
  out.word_vectors = features::WordVectorTable(config.word_dimension);
  const double unit = 1.0 / std::sqrt(static_cast<double>(config.word_dimension));
  std::vector<const std::vector<std::string>*> groups = {&kStopWords,
                                                         &kBackground};
  for (const auto& words : kTopicWords) groups.push_back(&words);
  groups.push_back(&kMarkers);
  for (const auto* words : groups) {
    const std::vector<float> center =
        GaussianVector(vectors, config.word_dimension, unit);
    for (const std::string& w : *words) {
      if (out.word_vectors.Contains(w)) continue;
      std::vector<float> v =
          GaussianVector(vectors, config.word_dimension, 0.5 * unit);
      for (size_t k = 0; k < v.size(); ++k) v[k] += center[k];
      out.word_vectors.Add(w, v);
    }
  }
  for (const std::string& w : {std::string("dont")}) {
    out.word_vectors.Add(w, GaussianVector(vectors, config.word_dimension, unit));
  }

  // Labeled subset: fairness reviews spread over topics, then background.
  std::vector<std::vector<size_t>> by_topic(topics);
  std::vector<size_t> near_misses;
  std::vector<size_t> negatives;
  for (size_t i = 0; i < drafts.size(); ++i) {
    if (drafts[i].short_body || drafts[i].foreign) continue;
    if (drafts[i].topic >= 0) {
      by_topic[drafts[i].topic].push_back(i);
    } else if (drafts[i].hard) {
      near_misses.push_back(i);
    } else {
      negatives.push_back(i);
    }
  }
  std::vector<size_t> chosen;
  for (size_t t = 0; t < topics; ++t) {
    const size_t want = config.labeled_fairness / topics +
                        (t < config.labeled_fairness % topics ? 1 : 0);
    for (size_t j : labeling.SampleIndices(by_topic[t].size(), want)) {
      chosen.push_back(by_topic[t][j]);
    }
  }
  // Coders see many on-topic complaints without a fairness angle, so half
  // of the labeled negatives are drawn from those.
  const size_t want_negative = config.labeled - config.labeled_fairness;
  const size_t want_near = std::min(want_negative / 2, near_misses.size());
  for (size_t j : labeling.SampleIndices(near_misses.size(), want_near)) {
    chosen.push_back(near_misses[j]);
  }
  for (size_t j :
       labeling.SampleIndices(negatives.size(), want_negative - want_near)) {
    chosen.push_back(negatives[j]);
  }
  std::sort(chosen.begin(), chosen.end());
  for (size_t i : chosen) {
    const Label truth =
        drafts[i].topic >= 0 ? Label::kFairness : Label::kNonFairness;
    Label second = truth;
    if (labeling.UniformDouble() < 0.08) {
      second = truth == Label::kFairness ? Label::kNonFairness : Label::kFairness;
    }
    corpus::LabeledReview l;
    l.review_id = out.reviews[i].id;
    l.labels = {{"coder-a", truth}, {"coder-b", second}};
    l.final_label = truth == Label::kFairness ? corpus::FinalLabel::kFairness
                                              : corpus::FinalLabel::kNonFairness;
    out.labels.push_back(std::move(l));
  }
  return out;
}

void WriteCorpus(const SyntheticCorpus& corpus,
                 const std::filesystem::path& directory) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  corpus::WriteJsonl(directory / "reviews.jsonl", corpus.reviews);
  auto write = [&](const fs::path& name, const std::string& content) {
    std::ofstream out(directory / name, std::ios::binary);
    out << content;
    if (!out) throw DataError("cannot write " + (directory / name).string());
  };
  write("labels.jsonl", corpus::LabelsToJsonl(corpus.labels));
  std::string truth;
  for (const corpus::Review& r : corpus.reviews) {
    const int t = corpus.topic_of.at(r.id);
    nlohmann::ordered_json j = {
        {"review_id", r.id},
        {"label", t >= 0 ? "fairness" : "non_fairness"},
        {"topic", t >= 0 ? nlohmann::ordered_json(corpus.topic_names[t])
                         : nlohmann::ordered_json(nullptr)}};
    truth += j.dump() + "\n";
  }
  write("ground_truth.jsonl", truth);
  write("seeds.json", nlohmann::json(corpus.seed_keywords).dump(2) + "\n");
  features::SaveWordVectors(corpus.word_vectors, directory / "word_vectors.bin",
                            features::VectorFormat::kBinary);
  features::SaveWordVectors(corpus.sentence_embeddings,
                            directory / "sentence_embeddings.bin",
                            features::VectorFormat::kBinary);
  nlohmann::ordered_json config = {
      {"paths",
       {{"corpus", "reviews.jsonl"},
        {"corpus_format", "jsonl"},
        {"labels", "labels.jsonl"},
        {"seeds", "seeds.json"},
        {"word_vectors", "word_vectors.bin"},
        {"word_vectors_format", "binary"},
        {"sentence_embeddings", "sentence_embeddings.bin"},
        {"sentence_embeddings_format", "binary"},
        {"output_dir", "out"}}},
      {"seed", 42},
      {"cluster", {{"k_min", 2}, {"k_max", 8}, {"restarts", 100}}}};
  write("config.json", config.dump(2) + "\n");
}

}  // namespace cmine::synthetic
