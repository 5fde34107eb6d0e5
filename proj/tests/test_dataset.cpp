#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <sstream>

#include "helpers.hpp"
#include "pgraph/dataset.hpp"

using namespace pgraph;
using testutil::make_review;

namespace {

SchemaMap amazon_style_map() {
  return SchemaMap::from_json(nlohmann::json{{"user_id", "reviewerID"},
                                             {"item_id", "asin"},
                                             {"title", "summary"},
                                             {"text", "reviewText"},
                                             {"rating", "overall"}});
}

}  // namespace

TEST_CASE("ingest of valid rows builds edges") {
  std::istringstream in(
      R"({"reviewerID":"u1","asin":"a1","summary":"t1","reviewText":"body one","overall":5})"
      "\n"
      R"({"reviewerID":"u2","asin":"a1","summary":"t2","reviewText":"body two","overall":4.0})"
      "\n"
      R"({"reviewerID":"u2","asin":"a2","summary":"t3","reviewText":"body three"})"
      "\n");
  ReviewGraph g;
  auto stats = ingest(in, amazon_style_map(), g);
  CHECK(stats.rows_read == 3);
  CHECK(stats.ingested == 3);
  CHECK(stats.skipped_malformed == 0);
  CHECK(g.edge_count() == 3);
  CHECK(g.user_reviews("u1")[0].rating == 5);
  CHECK(g.user_reviews("u2")[1].rating == std::nullopt);
}

TEST_CASE("rows missing text are skipped and counted") {
  std::istringstream in(
      R"({"reviewerID":"u1","asin":"a1","summary":"t"})"
      "\n"
      R"({"reviewerID":"u2","asin":"a1","reviewText":"fine"})"
      "\n"
      "not json at all\n");
  ReviewGraph g;
  auto stats = ingest(in, amazon_style_map(), g);
  CHECK(stats.ingested == 1);
  CHECK(stats.skipped_malformed == 2);
}

TEST_CASE("duplicated rows dedupe by user-item-text hash") {
  std::istringstream in(
      R"({"reviewerID":"u1","asin":"a1","reviewText":"same body"})"
      "\n"
      R"({"reviewerID":"u1","asin":"a1","reviewText":"same body"})"
      "\n"
      R"({"reviewerID":"u1","asin":"a1","reviewText":"different body"})"
      "\n");
  ReviewGraph g;
  auto stats = ingest(in, amazon_style_map(), g);
  CHECK(stats.ingested == 2);
  CHECK(stats.deduped == 1);
}

TEST_CASE("non-integral and out-of-range ratings become absent") {
  std::istringstream in(
      R"({"reviewerID":"u1","asin":"a1","reviewText":"x","overall":4.5})"
      "\n"
      R"({"reviewerID":"u2","asin":"a1","reviewText":"y","overall":9})"
      "\n");
  ReviewGraph g;
  ingest(in, amazon_style_map(), g);
  CHECK(g.user_reviews("u1")[0].rating == std::nullopt);
  CHECK(g.user_reviews("u2")[0].rating == std::nullopt);
}

TEST_CASE("schema map validation") {
  CHECK_THROWS_AS(SchemaMap::from_json(nlohmann::json::object()),
                  EmptySchemaMapError);
  CHECK_THROWS_AS(SchemaMap::from_json(nlohmann::json{{"user_id", "u"}}),
                  InvalidConfigError);
  ReviewGraph g;
  CHECK_THROWS_AS(ingest_file("/nonexistent/path.jsonl", amazon_style_map(), g),
                  UnreadableInputError);
}

TEST_CASE("synthetic corpus matches requested profile marginals") {
  SynthConfig cfg;
  cfg.users = 4000;
  cfg.items = 120;
  cfg.profile_dist = {{1, 0.70}, {2, 0.20}, {3, 0.07}, {4, 0.03}};
  cfg.seed = 9;
  ReviewGraph g = synth_graph(cfg);
  CHECK(g.user_count() == 4000);

  std::array<std::size_t, 4> hist{};
  for (const auto& u : g.users_in_order()) {
    hist[profile_size_bin(g.user_degree(u))] += 1;
  }
  CHECK(std::abs(double(hist[0]) / 4000.0 - 0.70) < 0.03);
  CHECK(std::abs(double(hist[1]) / 4000.0 - 0.20) < 0.03);
  CHECK(std::abs(double(hist[2]) / 4000.0 - 0.07) < 0.02);
  CHECK(std::abs(double(hist[3]) / 4000.0 - 0.03) < 0.02);
}

TEST_CASE("synthetic corpus is deterministic under a fixed seed") {
  SynthConfig cfg;
  cfg.users = 200;
  cfg.seed = 5;
  ReviewGraph a = synth_graph(cfg);
  ReviewGraph b = synth_graph(cfg);
  REQUIRE(a.edge_count() == b.edge_count());
  for (std::size_t i = 0; i < a.edge_count(); ++i) {
    CHECK(a.review_at(i).review_id == b.review_at(i).review_id);
    CHECK(a.review_at(i).text == b.review_at(i).text);
  }
}

TEST_CASE("splits are user-disjoint with in-split neighbors") {
  SynthConfig cfg;
  cfg.users = 1500;
  cfg.items = 80;
  cfg.seed = 21;
  ReviewGraph g = synth_graph(cfg);
  g.freeze();

  auto result = make_splits(g, {300, 60, 60}, 77);

  std::array<std::set<std::string>, 3> split_users;
  for (std::size_t s = 0; s < 3; ++s) {
    for (const auto& u : result.graphs[s].users_in_order()) {
      split_users[s].insert(u);
    }
  }
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t t = s + 1; t < 3; ++t) {
      for (const auto& u : split_users[s]) {
        CHECK(split_users[t].count(u) == 0);
      }
    }
  }

  for (std::size_t s = 0; s < 3; ++s) {
    CHECK(result.manifest.samples[s].size() == result.manifest.sizes[s]);
    for (const auto& sample : result.manifest.samples[s]) {
      bool neighbor = false;
      for (const auto& r : result.graphs[s].item_neighbors(sample.item)) {
        if (r.user != sample.user) neighbor = true;
      }
      CHECK(neighbor);
      CHECK(split_users[s].count(sample.user) == 1);
    }
  }
}

TEST_CASE("split stratification distances stay under the threshold") {
  SynthConfig cfg;
  cfg.users = 2000;
  cfg.seed = 3;
  ReviewGraph g = synth_graph(cfg);
  auto result = make_splits(g, {400, 50, 50}, 11, 0.05);
  for (std::size_t s = 0; s < 3; ++s) {
    CHECK(result.manifest.strat[s].chi_square_distance <= 0.05);
  }
}

TEST_CASE("splits are deterministic under a fixed seed") {
  SynthConfig cfg;
  cfg.users = 800;
  cfg.seed = 13;
  ReviewGraph g = synth_graph(cfg);
  auto a = make_splits(g, {150, 30, 30}, 5);
  auto b = make_splits(g, {150, 30, 30}, 5);
  CHECK(a.manifest.to_json() == b.manifest.to_json());

  auto c = make_splits(g, {150, 30, 30}, 6);
  CHECK(a.manifest.to_json() != c.manifest.to_json());
}

TEST_CASE("single-reviewer items never produce samples") {
  ReviewGraph g;
  // p_lonely has a single reviewer; p_shared has three.
  g.add_review(make_review("u1", "p_lonely", "r1", "t", "x"));
  g.add_review(make_review("u2", "p_shared", "r2", "t", "x"));
  g.add_review(make_review("u3", "p_shared", "r3", "t", "x"));
  g.add_review(make_review("u4", "p_shared", "r4", "t", "x"));
  // All four users land in train with sizes (n,0,0).
  auto result = make_splits(g, {2, 0, 0}, 1);
  for (const auto& sample : result.manifest.samples[0]) {
    CHECK(sample.item == "p_shared");
  }
}

TEST_CASE("toy graph where the neighbor constraint is vacuous gives exact sizes") {
  // Every user reviews one shared hub item, so an in-split neighbor exists
  // for every user no matter how the partition falls.
  ReviewGraph g;
  for (int i = 0; i < 60; ++i) {
    g.add_review(make_review("u" + std::to_string(i), "p_hub",
                             "rh" + std::to_string(i), "t", "x"));
    g.add_review(make_review("u" + std::to_string(i), "p" + std::to_string(i),
                             "rp" + std::to_string(i), "t", "x"));
  }
  auto result = make_splits(g, {10, 2, 2}, 4);
  CHECK(result.manifest.samples[0].size() == 10);
  CHECK(result.manifest.samples[1].size() == 2);
  CHECK(result.manifest.samples[2].size() == 2);
}

TEST_CASE("infeasible sizes raise") {
  ReviewGraph g;
  g.add_review(make_review("u1", "p1", "r1"));
  g.add_review(make_review("u2", "p2", "r2"));
  CHECK_THROWS_AS(make_splits(g, {2, 0, 0}, 1), InfeasibleSizesError);
}

TEST_CASE("manifest round trips through json") {
  SynthConfig cfg;
  cfg.users = 400;
  cfg.seed = 2;
  ReviewGraph g = synth_graph(cfg);
  auto result = make_splits(g, {80, 16, 16}, 9);

  testutil::TempDir tmp;
  save_split_result(result, tmp.str());
  auto loaded = SplitManifest::load(tmp.str("manifest.json"));
  CHECK(loaded.to_json() == result.manifest.to_json());

  auto train_graph = ReviewGraph::load_jsonl(tmp.str("train_graph.jsonl"));
  CHECK(train_graph.edge_count() == result.graphs[0].edge_count());
}

TEST_CASE("materialize maps fields per task") {
  ReviewGraph g;
  g.add_review(make_review("u1", "p1", "r1", "great", "works well", 4));
  g.add_review(make_review("u2", "p1", "r2", "meh", "broke", 2));

  SplitManifest manifest;
  manifest.sizes = {1, 0, 0};
  manifest.samples[0].push_back({"train-000000", "u1", "p1", "r1"});

  auto t1 = materialize(task_by_id(1), manifest, Split::kTrain, g);
  REQUIRE(t1.samples.size() == 1);
  CHECK(t1.samples[0].input == "great");
  CHECK(t1.samples[0].target_text == "works well");

  auto t5 = materialize(task_by_id(5), manifest, Split::kTrain, g);
  CHECK(t5.samples[0].input == "works well");
  CHECK(t5.samples[0].target_text == "great");

  auto t9 = materialize(task_by_id(9), manifest, Split::kTrain, g);
  CHECK(t9.samples[0].input == "great\nworks well");
  CHECK(t9.samples[0].target_rating == 4);
}

TEST_CASE("materialize drops empty targets and counts them") {
  ReviewGraph g;
  g.add_review(make_review("u1", "p1", "r1", "", "texty"));   // no title
  g.add_review(make_review("u2", "p1", "r2", "title", "x"));  // no rating

  SplitManifest manifest;
  manifest.samples[0].push_back({"train-000000", "u1", "p1", "r1"});
  manifest.samples[0].push_back({"train-000001", "u2", "p1", "r2"});

  // Task 5 target is the title: r1 drops.
  auto t5 = materialize(task_by_id(5), manifest, Split::kTrain, g);
  CHECK(t5.samples.size() == 1);
  CHECK(t5.dropped_empty_target == 1);

  // Task 9 target is the rating: both drop.
  auto t9 = materialize(task_by_id(9), manifest, Split::kTrain, g);
  CHECK(t9.samples.empty());
  CHECK(t9.dropped_empty_target == 2);
}

TEST_CASE("query_of returns the input verbatim and rejects empties") {
  BenchSample sample;
  sample.sample_id = "s";
  sample.input = "great blender";
  CHECK(query_of(task_by_id(1), sample).text == "great blender");
  sample.input.clear();
  CHECK_THROWS_AS(query_of(task_by_id(1), sample), MissingFieldError);
}
