// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "oracles.hpp"
#include "pgraph/runner.hpp"

using namespace pgraph;

namespace {

struct Check {
  bool passed = true;
  bool skipped = false;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && passed) {
      passed = false;
      detail = what;
    }
  }
  void skip(const std::string& why) {
    skipped = true;
    detail = why;
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// --- 1: graph statistics ----------------------------------------------------

void criterion_graph_stats(Check& c) {
  struct Row {
    std::size_t users, items, edges;
    double expected;
  };
  const Row rows[] = {
      {184771, 51376, 198668, 1.68},
      {15587, 2975, 19698, 2.12},
      {58087, 600, 71041, 2.42},
      {112993, 55930, 131075, 1.55},
  };
  // The published counts feed the same computation stats() uses.
  for (const auto& row : rows) {
    double avg = average_degree(row.users, row.items, row.edges);
    c.require(std::abs(avg - row.expected) <= 0.005,
              "avg degree " + std::to_string(avg) + " vs " +
                  std::to_string(row.expected));
  }
  // And the graph-derived path agrees on a materialized instance.
  ReviewGraph g;
  for (std::size_t e = 0; e < 19698; ++e) {
    Review r;
    r.user = "u" + std::to_string(e < 15587 ? e : 15587 - 1);
    r.item = "p" + std::to_string(e % 2975);
    r.review_id = "r" + std::to_string(e);
    r.text = "x";
    g.add_review(std::move(r));
  }
  auto s = g.stats();
  c.require(s.users == 15587 && s.items == 2975 && s.edges == 19698,
            "node/edge counts off");
  c.require(std::abs(s.avg_degree - 2.12) <= 0.005,
            "graph-derived avg degree " + std::to_string(s.avg_degree));
}

// --- 2: profile oracle equivalence -------------------------------------------

void criterion_profile_oracle(Check& c) {
  std::mt19937_64 rng(1001);
  for (int trial = 0; trial < 1000; ++trial) {
    ReviewGraph g = testutil::random_graph(rng, 200, 14, 9);
    for (const auto& user : g.users_in_order()) {
      auto p = build_profile(g, user);
      std::set<std::string> got;
      for (const auto& e : p.entries) {
        got.insert(g.review_at(e.edge_index).review_id);
      }
      auto expected = oracle::profile_review_ids(g.edges(), user);
      c.require(got == expected, "profile mismatch for " + user);
      if (!c.passed) return;
    }
  }
}

// --- 3: bm25 oracle ----------------------------------------------------------

void criterion_bm25_oracle(Check& c) {
  std::mt19937_64 rng(2002);
  static const char* kVocab[] = {"red",  "blue", "fox",  "dog", "wine",
                                 "sun",  "rain", "fast", "slow", "box"};
  for (int trial = 0; trial < 200; ++trial) {
    ReviewGraph g;
    std::vector<ProfileEntry> pool;
    std::size_t n = 1 + rng_below(rng, 20);
    for (std::size_t i = 0; i < n; ++i) {
      std::string text;
      std::size_t words = rng_below(rng, 12);
      for (std::size_t w = 0; w < words; ++w) {
        if (w > 0) text += ' ';
        text += kVocab[rng_below(rng, 10)];
      }
      Review r;
      r.user = "u" + std::to_string(i);
      r.item = "p0";
      r.review_id = "r" + std::to_string(i);
      r.title = kVocab[rng_below(rng, 10)];
      r.text = text;
      g.add_review(std::move(r));
      pool.push_back({i, EntrySource::kNeighbor});
    }
    std::string qtext = std::string(kVocab[rng_below(rng, 10)]) + " " +
                        kVocab[rng_below(rng, 10)] + " " +
                        kVocab[rng_below(rng, 10)];
    auto ctx = bm25_rank(Query{qtext}, g, pool, int(n));

    std::vector<std::vector<std::string>> docs;
    for (const auto& e : pool) {
      docs.push_back(tokenize(retrieval_document(g.review_at(e.edge_index))));
    }
    auto expected = oracle::bm25_scores(tokenize(qtext), docs);

    c.require(ctx.entries.size() == n, "context size");
    double prev = 1e300;
    for (const auto& scored : ctx.entries) {
      c.require(std::abs(scored.score - expected[scored.entry.edge_index]) <=
                    1e-9,
                "score off by more than 1e-9");
      c.require(scored.score <= prev + 1e-12, "scores not non-increasing");
      prev = scored.score;
    }
    if (!c.passed) return;
  }
}

// --- 4: metric oracles -------------------------------------------------------

void criterion_metric_oracles(Check& c) {
  // ROUGE-L against exhaustive subsequence enumeration: every pair of
  // 3-symbol strings up to length 4, plus 2000 random pairs up to length 12.
  static const char* kSyms[] = {"a", "b", "c"};
  std::vector<std::vector<std::string>> short_strings;
  short_strings.push_back({});
  for (std::size_t len = 1; len <= 4; ++len) {
    std::size_t count = 1;
    for (std::size_t i = 0; i < len; ++i) count *= 3;
    for (std::size_t code = 0; code < count; ++code) {
      std::vector<std::string> s;
      std::size_t x = code;
      for (std::size_t i = 0; i < len; ++i) {
        s.push_back(kSyms[x % 3]);
        x /= 3;
      }
      short_strings.push_back(std::move(s));
    }
  }
  auto join = [](const std::vector<std::string>& v) {
    std::string out;
    for (const auto& t : v) {
      if (!out.empty()) out += ' ';
      out += t;
    }
    return out;
  };
  auto expected_rougeL = [](std::size_t lcs, std::size_t la, std::size_t lb) {
    if (la == 0 || lb == 0 || lcs == 0) return 0.0;
    double p = double(lcs) / double(la);
    double r = double(lcs) / double(lb);
    return 2.0 * p * r / (p + r);
  };
  for (const auto& a : short_strings) {
    for (const auto& b : short_strings) {
      double expected =
          expected_rougeL(oracle::lcs_brute_force(a, b), a.size(), b.size());
      c.require(std::abs(rougeL(join(a), join(b)) - expected) <= 1e-12,
                "rougeL vs brute force (short)");
    }
    if (!c.passed) return;
  }
  std::mt19937_64 rng(3003);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<std::string> a, b;
    std::size_t la = 1 + rng_below(rng, 12), lb = 1 + rng_below(rng, 12);
    for (std::size_t i = 0; i < la; ++i) a.push_back(kSyms[rng_below(rng, 3)]);
    for (std::size_t i = 0; i < lb; ++i) b.push_back(kSyms[rng_below(rng, 3)]);
    double expected =
        expected_rougeL(oracle::lcs_brute_force(a, b), a.size(), b.size());
    c.require(std::abs(rougeL(join(a), join(b)) - expected) <= 1e-12,
              "rougeL vs brute force (random <=12)");
    if (!c.passed) return;
  }

  // ROUGE-1 hand-computed fixtures.
  struct R1 {
    const char* cand;
    const char* ref;
    double expected;
  };
  const R1 r1_fixtures[] = {
      {"the cat sat", "the cat ran fast", 4.0 / 7.0},
      {"a a b", "a b b", 2.0 / 3.0},
      {"a a a", "a", 0.5},
      {"Hello, World!", "hello world", 1.0},
      {"x", "x y", 2.0 / 3.0},
      {"b a", "a b", 1.0},
      {"the quick brown fox", "the lazy dog", 2.0 / 7.0},
      {"um dois três", "um dois tres", 2.0 / 3.0},
      {"one two three four", "one two", 2.0 / 3.0},
      {"z z z z", "z z", 2.0 / 3.0},
      {"same words", "same words", 1.0},
      {"aa bb", "cc dd", 0.0},
  };
  for (const auto& f : r1_fixtures) {
    c.require(std::abs(rouge1(f.cand, f.ref) - f.expected) <= 1e-12,
              std::string("rouge1 fixture: ") + f.cand);
  }

  // METEOR hand-computed fixtures (alpha .9, beta 3, gamma .5).
  struct M {
    const char* cand;
    const char* ref;
    double expected;
  };
  const M meteor_fixtures[] = {
      {"the cat sat", "the cat sat", 1.0 - 0.5 / 27.0},
      {"cats running", "cat runs", 0.9375},
      {"the cat", "the cat sat", (20.0 / 29.0) * 0.9375},
      {"b a", "a b", 0.5},
      {"a x a", "a a", (2.0 / 3.0) / 0.7 * 0.5},
      {"yes", "yes", 0.5},
      {"yes no", "yes", (0.5 / 0.55) * 0.5},
      {"running fast", "runs", (0.5 / 0.55) * 0.5},
      {"good value", "good value poor shipping", (0.5 / 0.95) * (1.0 - 0.0625)},
      {"very nice", "very nice", 1.0 - 0.0625},
      {"a b c d", "a b c d", 1.0 - 0.5 / 64.0},
      {"a b x y", "a b", (0.5 / 0.55) * 0.9375},
      {"aa bb", "cc dd", 0.0},
  };
  for (const auto& f : meteor_fixtures) {
    c.require(std::abs(meteor(f.cand, f.ref) - f.expected) <= 1e-12,
              std::string("meteor fixture: ") + f.cand);
  }

  // MAE/RMSE closed forms.
  auto s1 = mae_rmse(std::vector<int>{1, 5}, std::vector<int>{5, 1});
  c.require(std::abs(s1.mae - 4.0) <= 1e-12 && std::abs(s1.rmse - 4.0) <= 1e-12,
            "two-point case [1,5] vs [5,1]");
  auto s2 = mae_rmse(std::vector<int>{2, 4}, std::vector<int>{1, 1});
  c.require(std::abs(s2.mae - 2.0) <= 1e-12 &&
                std::abs(s2.rmse - std::sqrt(5.0)) <= 1e-12,
            "two-point case [2,4] vs [1,1]");

  // RMSE >= MAE on 1000 random vectors.
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t n = 1 + rng_below(rng, 40);
    std::vector<int> preds, targets;
    for (std::size_t i = 0; i < n; ++i) {
      preds.push_back(int(1 + rng_below(rng, 5)));
      targets.push_back(int(1 + rng_below(rng, 5)));
    }
    auto s = mae_rmse(preds, targets);
    c.require(s.rmse >= s.mae - 1e-12, "rmse < mae");
  }
}

// --- 5: split invariants -----------------------------------------------------

void criterion_split_invariants(Check& c) {
  SynthConfig cfg;
  cfg.users = 7200;  // ~10k reviews under the default marginals
  cfg.items = 400;
  cfg.seed = 404;
  ReviewGraph g = synth_graph(cfg);
  c.require(g.edge_count() > 9000 && g.edge_count() < 12000,
            "synthetic corpus size drifted: " + std::to_string(g.edge_count()));

  SplitSizes sizes{800, 100, 100};
  auto result = make_splits(g, sizes, 2024, 0.05);
  auto rerun = make_splits(g, sizes, 2024, 0.05);
  c.require(result.manifest.to_json() == rerun.manifest.to_json(),
            "manifest not deterministic under fixed seed");

  std::array<std::set<std::string>, 3> users;
  for (std::size_t s = 0; s < 3; ++s) {
    for (const auto& u : result.graphs[s].users_in_order()) users[s].insert(u);
  }
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t t = s + 1; t < 3; ++t) {
      for (const auto& u : users[s]) {
        c.require(users[t].count(u) == 0, "user in two splits: " + u);
        if (!c.passed) return;
      }
    }
  }
  for (std::size_t s = 0; s < 3; ++s) {
    c.require(result.manifest.samples[s].size() == sizes[s],
              "split size mismatch");
    for (const auto& sample : result.manifest.samples[s]) {
      bool neighbor = false;
      for (const auto& r : result.graphs[s].item_neighbors(sample.item)) {
        if (r.user != sample.user) neighbor = true;
      }
      c.require(neighbor, "sample without in-split neighbor: " + sample.sample_id);
      if (!c.passed) return;
    }
    c.require(result.manifest.strat[s].chi_square_distance <= 0.05,
              "stratification distance above threshold");
  }
}

// --- 6: strategy separation ---------------------------------------------------

struct SeparationFixture {
  testutil::TempDir tmp;
  std::string manifest_path;

  SeparationFixture() {
    std::mt19937_64 rng(606);
    static const char* kCommon[] = {"good", "value", "price", "fast", "ship",
                                    "box",  "item",  "nice",  "works", "fine"};
    auto common_words = [&](std::size_t n) {
      std::string out;
      for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) out += ' ';
        out += kCommon[rng_below(rng, 10)];
      }
      return out;
    };

    ReviewGraph g;
    SplitManifest manifest;
    manifest.seed = 0;
    int next_id = 0;
    auto rid = [&]() { return "r" + std::to_string(next_id++); };

    const int n_samples = 60;
    for (int i = 0; i < n_samples; ++i) {
      std::string si = "s" + std::to_string(i);       // sample user
      std::string ni = "n" + std::to_string(i);       // twin author
      std::string di = "d" + std::to_string(i);       // decoy author
      std::string item = "q" + std::to_string(i);
      std::string marker = "marker" + std::to_string(i);
      std::string title = marker + " finish";
      // Ten-word target; the twin shares nine of them.
      std::string stem = "install took minutes and the " + marker +
                         " finish looks";
      std::string target_text = stem + " superb";
      std::string twin_text = stem + " splendid";

      std::string target_id = rid();
      g.add_review({si, item, title, target_text, 5, target_id});
      g.add_review({ni, item, title, twin_text, 5, rid()});
      g.add_review({di, item, common_words(3), common_words(10), 3, rid()});
      // The sample user's own review elsewhere: mild overlap with the target
      // ("install"), nothing that matches the query.
      g.add_review({si, "own" + std::to_string(i), common_words(2),
                    "install went " + common_words(8), 4, rid()});

      ManifestSample sample;
      char sid[32];
      std::snprintf(sid, sizeof(sid), "test-%06d", i);
      sample.sample_id = sid;
      sample.user = si;
      sample.item = item;
      sample.review_id = target_id;
      manifest.samples[2].push_back(sample);
    }

    manifest.sizes = {0, 0, std::size_t(n_samples)};
    manifest.graph_files = {"graph.jsonl", "graph.jsonl", "graph.jsonl"};
    g.save_jsonl(tmp.str("graph.jsonl"));
    manifest.save(tmp.str("manifest.json"));
    manifest_path = tmp.str("manifest.json");
  }

  double rouge1_of(Strategy strategy) {
    RunConfig cfg;
    cfg.task_id = 1;
    cfg.strategy = strategy;
    cfg.ranker = Ranker::kBm25;
    cfg.k = 1;
    cfg.split = Split::kTest;
    cfg.backend = "extractive";
    cfg.manifest_path = manifest_path;
    cfg.seed = 99;
    cfg.output_dir = tmp.str(std::string("out_") + to_string(strategy));
    auto outcome = run(cfg);
    if (!outcome.report.rouge1) throw Error("no rouge1 in report");
    if (outcome.report.n_errors != 0) throw Error("pipeline errors");
    return *outcome.report.rouge1;
  }
};

void criterion_strategy_separation(Check& c) {
  SeparationFixture fx;
  double full = fx.rouge1_of(Strategy::kPGraphRag);
  double neighbors = fx.rouge1_of(Strategy::kNeighborsOnly);
  double own = fx.rouge1_of(Strategy::kUserOnly);
  double random = fx.rouge1_of(Strategy::kRandom);
  double none = fx.rouge1_of(Strategy::kNone);

  std::ostringstream seen;
  seen.precision(3);
  seen << std::fixed << "pgraphrag=" << full << " neighbors=" << neighbors
       << " user=" << own << " random=" << random << " none=" << none;
  c.detail = seen.str();

  c.require(full >= neighbors, "pgraphrag < neighbors_only (" + seen.str() + ")");
  c.require(neighbors >= own + 0.05,
            "neighbors_only - user_only gap < 0.05 (" + seen.str() + ")");
  c.require(full >= random + 0.05,
            "pgraphrag - random gap < 0.05 (" + seen.str() + ")");
  c.require(random >= none + 0.05,
            "random - none gap < 0.05 (" + seen.str() + ")");
}

// --- 7: k mechanics ------------------------------------------------------------

void criterion_k_mechanics(Check& c) {
  // Requested k=4 against profiles of size 1 and 2 returns the profile size.
  ReviewGraph g;
  g.add_review({"u1", "p1", "t", "alpha beta", 5, "r1"});
  g.add_review({"x1", "p1", "t", "gamma", 4, "r2"});
  g.add_review({"u2", "p2", "t", "delta", 3, "r3"});
  g.add_review({"x2", "p2", "t", "epsilon", 2, "r4"});
  g.add_review({"x3", "p2", "t", "zeta", 1, "r5"});

  RetrievalConfig cfg;
  cfg.k = 4;
  auto ctx1 = retrieve(cfg, g, "u1", Query{"alpha"}, std::string("r1"));
  c.require(ctx1.requested_k == 4 && ctx1.actual_k == 1,
            "profile of size 1 should yield actual_k 1");
  auto ctx2 = retrieve(cfg, g, "u2", Query{"delta"}, std::string("r3"));
  c.require(ctx2.actual_k == 2, "profile of size 2 should yield actual_k 2");

  // Prefix property on 500 random fixtures.
  std::mt19937_64 rng(707);
  static const char* kVocab[] = {"car", "bike", "train", "bus", "tram"};
  for (int trial = 0; trial < 500; ++trial) {
    ReviewGraph rg;
    std::vector<ProfileEntry> pool;
    std::size_t n = 2 + rng_below(rng, 12);
    for (std::size_t i = 0; i < n; ++i) {
      std::string text = kVocab[rng_below(rng, 5)];
      text += ' ';
      text += kVocab[rng_below(rng, 5)];
      rg.add_review({"u" + std::to_string(i), "p0", kVocab[rng_below(rng, 5)],
                     text, std::nullopt, "r" + std::to_string(i)});
      pool.push_back({i, EntrySource::kNeighbor});
    }
    Query q{std::string(kVocab[rng_below(rng, 5)]) + " " +
            kVocab[rng_below(rng, 5)]};
    int k = 1 + int(rng_below(rng, n - 1));
    auto small = bm25_rank(q, rg, pool, k);
    auto big = bm25_rank(q, rg, pool, k + 1);
    c.require(small.entries.size() <= big.entries.size(), "k+1 shrank");
    for (std::size_t i = 0; i < small.entries.size(); ++i) {
      c.require(small.entries[i].entry.edge_index ==
                    big.entries[i].entry.edge_index,
                "top-k not a prefix of top-(k+1)");
    }
    if (!c.passed) return;
  }
}

// --- 8: end-to-end reproducibility ---------------------------------------------

void criterion_reproducibility(Check& c) {
  testutil::TempDir tmp;
  SynthConfig scfg;
  scfg.users = 900;
  scfg.items = 70;
  scfg.seed = 808;
  ReviewGraph g = synth_graph(scfg);
  auto split_result = make_splits(g, {100, 25, 25}, 808);
  save_split_result(split_result, tmp.str("data"));

  for (int task_id : {1, 9}) {
    RunConfig cfg;
    cfg.task_id = task_id;
    cfg.strategy = Strategy::kPGraphRag;
    cfg.k = 2;
    cfg.split = Split::kTest;
    cfg.backend = "extractive";
    cfg.manifest_path = tmp.str("data/manifest.json");
    cfg.cache_dir = tmp.str("cache" + std::to_string(task_id));
    cfg.parallelism = 4;
    cfg.seed = 5;

    cfg.output_dir = tmp.str("a" + std::to_string(task_id));
    auto first = run(cfg);
    c.require(first.backend_calls > 0, "cold run should call the backend");

    cfg.output_dir = tmp.str("b" + std::to_string(task_id));
    auto second = run(cfg);
    c.require(second.backend_calls == 0,
              "warm-cache rerun issued backend calls");

    std::string ra = slurp(tmp.str("a" + std::to_string(task_id)) + "/report.json");
    std::string rb = slurp(tmp.str("b" + std::to_string(task_id)) + "/report.json");
    c.require(!ra.empty() && ra == rb, "reports not byte-identical");
    std::string ca = slurp(tmp.str("a" + std::to_string(task_id)) + "/report.csv");
    std::string cb = slurp(tmp.str("b" + std::to_string(task_id)) + "/report.csv");
    c.require(!ca.empty() && ca == cb, "csv reports not byte-identical");
  }
}

// --- 9: live-service smoke (env-gated) -----------------------------------------

void criterion_live_smoke(Check& c) {
  const char* base = std::getenv("PGRAPH_API_BASE_URL");
  if (base == nullptr || *base == '\0') {
    c.skip("PGRAPH_API_BASE_URL not set");
    return;
  }
  testutil::TempDir tmp;
  SynthConfig scfg;
  scfg.users = 600;
  scfg.seed = 909;
  ReviewGraph g = synth_graph(scfg);
  auto split_result = make_splits(g, {60, 20, 20}, 909);
  save_split_result(split_result, tmp.str("data"));

  RunConfig cfg;
  cfg.task_id = 5;
  cfg.strategy = Strategy::kPGraphRag;
  cfg.k = 2;
  cfg.split = Split::kTest;
  cfg.backend = "http";
  const char* model = std::getenv("PGRAPH_SMOKE_MODEL");
  cfg.model_id = model ? model : "gpt-4o-mini";
  cfg.manifest_path = tmp.str("data/manifest.json");
  cfg.output_dir = tmp.str("live");
  cfg.subsample = 20;
  cfg.parallelism = 2;
  auto outcome = run(cfg);
  c.require(outcome.report.n_samples == 20, "expected 20 samples");
  c.require(outcome.report.n_errors * 20 <= outcome.report.n_samples,
            "more than 5% transport/parse failures: " +
                std::to_string(outcome.report.n_errors));
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<void(Check&)> fn;
    double budget_seconds;
  };
  const std::vector<Criterion> criteria = {
      {1, "graph statistics reproduce the published average degrees",
       criterion_graph_stats, 1.0},
      {2, "profile construction equals the brute-force set comprehension "
          "(1000 random graphs)",
       criterion_profile_oracle, 30.0},
      {3, "bm25 matches an independent Okapi evaluation (200 fixtures)",
       criterion_bm25_oracle, 10.0},
      {4, "metric oracles: rougeL brute force (all pairs len<=4 + 2000 random "
          "len<=12), hand-computed rouge1/meteor, mae/rmse",
       criterion_metric_oracles, 60.0},
      {5, "split invariants on a 10k-review synthetic corpus",
       criterion_split_invariants, 30.0},
      {6, "strategy separation with the extractive mock",
       criterion_strategy_separation, 60.0},
      {7, "k fallback and prefix mechanics (500 fixtures)",
       criterion_k_mechanics, 30.0},
      {8, "end-to-end reproducibility and warm-cache reruns (tasks 1 and 9)",
       criterion_reproducibility, 120.0},
      {9, "live-service smoke (env-gated)", criterion_live_smoke, 300.0},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    Check check;
    auto start = std::chrono::steady_clock::now();
    try {
      criterion.fn(check);
    } catch (const std::exception& e) {
      check.passed = false;
      check.detail = std::string("exception: ") + e.what();
    }
    double seconds = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start)
                         .count();
    if (check.passed && seconds > criterion.budget_seconds) {
      check.passed = false;
      check.detail = "runtime " + std::to_string(seconds) + "s over budget " +
                     std::to_string(criterion.budget_seconds) + "s";
    }
    const char* verdict = check.skipped ? "SKIP" : check.passed ? "PASS" : "FAIL";
    std::printf("[%s] criterion %d (%.2fs): %s%s%s\n", verdict, criterion.id,
                seconds, criterion.name, check.detail.empty() ? "" : " -- ",
                check.detail.c_str());
    if (!check.passed && !check.skipped) ++failures;
  }
  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
