#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pgraph/embedding.hpp"
#include "pgraph/errors.hpp"
#include "pgraph/graph.hpp"
#include "pgraph/hash.hpp"
#include "pgraph/profile.hpp"
#include "pgraph/text.hpp"

namespace pgraph {

struct Query {
  std::string text;
};

enum class Strategy { kPGraphRag, kNeighborsOnly, kUserOnly, kRandom, kNone };
enum class Ranker { kBm25, kDense };

inline const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::kPGraphRag: return "pgraphrag";
    case Strategy::kNeighborsOnly: return "neighbors_only";
    case Strategy::kUserOnly: return "user_only";
    case Strategy::kRandom: return "random";
    case Strategy::kNone: return "none";
  }
  return "?";
}

inline const char* to_string(Ranker r) {
  return r == Ranker::kBm25 ? "bm25" : "dense";
}

inline Strategy strategy_from_string(std::string_view s) {
  if (s == "pgraphrag") return Strategy::kPGraphRag;
  if (s == "neighbors_only") return Strategy::kNeighborsOnly;
  if (s == "user_only") return Strategy::kUserOnly;
  if (s == "random") return Strategy::kRandom;
  if (s == "none") return Strategy::kNone;
  throw InvalidConfigError("unknown strategy: " + std::string(s));
}

inline Ranker ranker_from_string(std::string_view s) {
  if (s == "bm25") return Ranker::kBm25;
  if (s == "dense") return Ranker::kDense;
  throw InvalidConfigError("unknown ranker: " + std::string(s));
}

struct RetrievalConfig {
  Strategy strategy = Strategy::kPGraphRag;
  Ranker ranker = Ranker::kBm25;
  int k = 4;
  std::uint64_t seed = 0;  // used by the random strategy
};

struct ScoredEntry {
  ProfileEntry entry;
  double score = 0.0;
  int rank = 0;  // 1-based
};

struct RetrievedContext {
  std::vector<ScoredEntry> entries;
  int requested_k = 0;
  int actual_k = 0;
};

// The retrieval document is the entry's title and text, space-joined.
inline std::string retrieval_document(const Review& r) {
  return r.title + " " + r.text;
}

namespace bm25 {

constexpr double kK1 = 1.2;
constexpr double kB = 0.75;

// IDF over the candidate pool only. The log1p form keeps every term's IDF
// strictly positive, so a document scores 0 exactly when it shares no query
// term, and tiny per-user corpora cannot produce negative weights.
inline double idf(std::size_t doc_count, std::size_t doc_freq) {
  double n = double(doc_count);
  double df = double(doc_freq);
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

}  // namespace bm25

namespace detail {

inline RetrievedContext take_top_k(std::vector<ScoredEntry> ranked, int k) {
  RetrievedContext ctx;
  ctx.requested_k = k;
  // Stable by construction: callers sort with stable_sort on score only, so
  // equal scores keep insertion order and top-k at k is a prefix of k+1.
  if (int(ranked.size()) > k) ranked.resize(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    ranked[i].rank = int(i) + 1;
  }
  ctx.actual_k = int(ranked.size());
  ctx.entries = std::move(ranked);
  return ctx;
}

}  // namespace detail

// Okapi BM25 over the pool as the corpus. Ties break by insertion order.
inline RetrievedContext bm25_rank(const Query& query, const ReviewGraph& graph,
                                  const std::vector<ProfileEntry>& pool,
                                  int k) {
  if (k < 1) throw InvalidConfigError("k must be >= 1");
  std::vector<std::vector<std::string>> docs;
  docs.reserve(pool.size());
  double total_len = 0.0;
  for (const auto& e : pool) {
    docs.push_back(tokenize(retrieval_document(graph.review_at(e.edge_index))));
    total_len += double(docs.back().size());
  }
  double avgdl = docs.empty() ? 0.0 : total_len / double(docs.size());

  std::unordered_map<std::string, std::size_t> doc_freq;
  for (const auto& d : docs) {
    std::unordered_map<std::string, bool> seen;
    for (const auto& t : d) {
      if (!seen[t]) {
        seen[t] = true;
        ++doc_freq[t];
      }
    }
  }

  std::vector<std::string> query_terms = tokenize(query.text);
  std::vector<ScoredEntry> ranked;
  ranked.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    std::unordered_map<std::string, std::size_t> tf;
    for (const auto& t : docs[i]) ++tf[t];
    double dl = double(docs[i].size());
    double norm = avgdl > 0.0 ? bm25::kK1 * (1.0 - bm25::kB + bm25::kB * dl / avgdl)
                              : bm25::kK1;
    double score = 0.0;
    for (const auto& term : query_terms) {
      auto it = tf.find(term);
      if (it == tf.end()) continue;
      double f = double(it->second);
      score += bm25::idf(pool.size(), doc_freq[term]) * (f * (bm25::kK1 + 1.0)) /
               (f + norm);
    }
    ranked.push_back({pool[i], score, 0});
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const ScoredEntry& a, const ScoredEntry& b) {
                     return a.score > b.score;
                   });
  return detail::take_top_k(std::move(ranked), k);
}

// Cosine similarity of mean-pooled token embeddings. Entries that fail to
// embed surface as EmbedderError naming the offending review.
inline RetrievedContext dense_rank(const Query& query, const ReviewGraph& graph,
                                   const std::vector<ProfileEntry>& pool, int k,
                                   EmbeddingProvider& embedder) {
  if (k < 1) throw InvalidConfigError("k must be >= 1");
  std::size_t dim = embedder.dimension();
  std::vector<double> query_vec =
      mean_pool(embedder.embed_tokens(tokenize(query.text)), dim);

  std::vector<ScoredEntry> ranked;
  ranked.reserve(pool.size());
  for (const auto& e : pool) {
    const Review& r = graph.review_at(e.edge_index);
    std::vector<double> doc_vec;
    try {
      doc_vec = mean_pool(embedder.embed_tokens(tokenize(retrieval_document(r))),
                          dim);
    } catch (const std::exception& ex) {
      throw EmbedderError("review " + r.review_id + ": " + ex.what());
    }
    ranked.push_back({e, cosine_similarity(query_vec, doc_vec), 0});
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const ScoredEntry& a, const ScoredEntry& b) {
                     return a.score > b.score;
                   });
  return detail::take_top_k(std::move(ranked), k);
}

// Strategy selects the candidate pool, then the ranker orders it.
// `sample_key` personalizes the random draw; it defaults to the user id.
inline RetrievedContext retrieve(
    const RetrievalConfig& cfg, const ReviewGraph& graph,
    const std::string& user, const Query& query,
    const std::optional<std::string>& exclude_review_id = std::nullopt,
    EmbeddingProvider* embedder = nullptr, std::string_view sample_key = {}) {
  if (!graph.has_user(user)) throw UnknownUserError(user);

  // No-retrieval ignores ranker and k entirely.
  if (cfg.strategy == Strategy::kNone) {
    RetrievedContext ctx;
    ctx.requested_k = cfg.k;
    ctx.actual_k = 0;
    return ctx;
  }
  if (cfg.k < 1) throw InvalidConfigError("k must be >= 1");

  if (cfg.strategy == Strategy::kRandom) {
    // Uniform draw from every review in the graph except the held-out target:
    // without replacement, with replacement only when the pool is too small.
    std::vector<std::size_t> pool;
    pool.reserve(graph.edge_count());
    for (std::size_t i = 0; i < graph.edge_count(); ++i) {
      if (exclude_review_id &&
          graph.review_at(i).review_id == *exclude_review_id) {
        continue;
      }
      pool.push_back(i);
    }
    std::mt19937_64 rng(
        derive_seed(cfg.seed, sample_key.empty() ? user : sample_key));
    std::vector<std::size_t> drawn;
    if (pool.size() >= static_cast<std::size_t>(cfg.k)) {
      deterministic_shuffle(pool, rng);
      drawn.assign(pool.begin(), pool.begin() + cfg.k);
    } else if (!pool.empty()) {
      for (int i = 0; i < cfg.k; ++i) {
        drawn.push_back(pool[rng_below(rng, pool.size())]);
      }
    }
    RetrievedContext ctx;
    ctx.requested_k = cfg.k;
    for (std::size_t i = 0; i < drawn.size(); ++i) {
      EntrySource src = graph.review_at(drawn[i]).user == user
                            ? EntrySource::kOwn
                            : EntrySource::kNeighbor;
      ctx.entries.push_back({{drawn[i], src}, 0.0, int(i) + 1});
    }
    ctx.actual_k = int(ctx.entries.size());
    return ctx;
  }

  UserProfile profile = build_profile(graph, user, exclude_review_id);
  std::vector<ProfileEntry> pool;
  switch (cfg.strategy) {
    case Strategy::kPGraphRag:
      pool = profile.entries;
      break;
    case Strategy::kNeighborsOnly:
      pool = profile.neighbor_entries();
      break;
    case Strategy::kUserOnly:
      pool = profile.own_entries();
      break;
    default:
      break;
  }

  if (cfg.ranker == Ranker::kDense) {
    if (embedder == nullptr) {
      throw InvalidConfigError("dense ranker requires an embedding provider");
    }
    return dense_rank(query, graph, pool, cfg.k, *embedder);
  }
  return bm25_rank(query, graph, pool, cfg.k);
}

}  // namespace pgraph
