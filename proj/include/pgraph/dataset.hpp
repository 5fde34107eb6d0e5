#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "pgraph/errors.hpp"
#include "pgraph/graph.hpp"
#include "pgraph/hash.hpp"
#include "pgraph/tasks.hpp"

namespace pgraph {

// ---------------------------------------------------------------------------
// Ingestion

// Binds source JSONL field names to review fields. user/item/text are
// required per row; the rest are optional.
struct SchemaMap {
  std::string user_field;
  std::string item_field;
  std::string text_field;
  std::string title_field;      // optional
  std::string rating_field;     // optional
  std::string review_id_field;  // optional; generated when unbound

  static SchemaMap from_json(const nlohmann::json& j) {
    SchemaMap m;
    m.user_field = j.value("user_id", "");
    m.item_field = j.value("item_id", "");
    m.text_field = j.value("text", "");
    m.title_field = j.value("title", "");
    m.rating_field = j.value("rating", "");
    m.review_id_field = j.value("review_id", "");
    if (m.user_field.empty() && m.item_field.empty() && m.text_field.empty()) {
      throw EmptySchemaMapError();
    }
    if (m.user_field.empty() || m.item_field.empty() || m.text_field.empty()) {
      throw InvalidConfigError(
          "schema map must bind user_id, item_id and text");
    }
    return m;
  }

  static SchemaMap load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UnreadableInputError(path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
  }
};

struct IngestStats {
  std::size_t rows_read = 0;
  std::size_t skipped_malformed = 0;
  std::size_t deduped = 0;
  std::size_t ingested = 0;
};

// Streams raw JSONL into the graph. Malformed rows are skipped and counted;
// duplicate (user, item, text) rows collapse to one edge.
inline IngestStats ingest(std::istream& in, const SchemaMap& map,
                          ReviewGraph& graph) {
  IngestStats stats;
  std::unordered_set<std::uint64_t> seen;
  std::string line;
  std::size_t generated = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++stats.rows_read;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      ++stats.skipped_malformed;
      continue;
    }
    if (!j.is_object()) {
      ++stats.skipped_malformed;
      continue;
    }
    auto str_field = [&](const std::string& field) -> std::optional<std::string> {
      if (field.empty() || !j.contains(field)) return std::nullopt;
      const auto& v = j[field];
      if (v.is_string()) return v.get<std::string>();
      if (v.is_number_integer()) return std::to_string(v.get<long long>());
      return std::nullopt;
    };
    auto user = str_field(map.user_field);
    auto item = str_field(map.item_field);
    auto text = str_field(map.text_field);
    if (!user || !item || !text || user->empty() || item->empty() ||
        text->empty()) {
      ++stats.skipped_malformed;
      continue;
    }
    Review r;
    r.user = *user;
    r.item = *item;
    r.text = *text;
    if (auto title = str_field(map.title_field)) r.title = *title;
    if (!map.rating_field.empty() && j.contains(map.rating_field)) {
      const auto& v = j[map.rating_field];
      double d = -1.0;
      if (v.is_number()) d = v.get<double>();
      if (d >= 1.0 && d <= 5.0 && d == std::floor(d)) r.rating = int(d);
    }
    std::uint64_t dedupe_key =
        fnv1a64(r.text, fnv1a64("\x1f", fnv1a64(r.item, fnv1a64(r.user))));
    if (!seen.insert(dedupe_key).second) {
      ++stats.deduped;
      continue;
    }
    if (auto id = str_field(map.review_id_field)) {
      r.review_id = *id;
    } else {
      char buf[24];
      std::snprintf(buf, sizeof(buf), "r%08zu", ++generated);
      r.review_id = buf;
    }
    try {
      graph.add_review(std::move(r));
      ++stats.ingested;
    } catch (const DuplicateReviewIdError&) {
      ++stats.skipped_malformed;
    }
  }
  return stats;
}

inline IngestStats ingest_file(const std::string& path, const SchemaMap& map,
                               ReviewGraph& graph) {
  std::ifstream in(path);
  if (!in) throw UnreadableInputError(path);
  return ingest(in, map, graph);
}

// ---------------------------------------------------------------------------
// Synthetic corpus

// Generator with controllable profile-size marginals and a skewed item
// popularity distribution. Real corpora cannot be redistributed; this stands
// in for them at desk scale.
struct SynthConfig {
  std::size_t users = 1000;
  std::size_t items = 150;
  std::vector<std::pair<int, double>> profile_dist = {
      {1, 0.75}, {2, 0.15}, {3, 0.06}, {4, 0.04}};
  std::uint64_t seed = 1;
};

namespace detail {

inline std::string synth_words(std::mt19937_64& rng,
                               const std::vector<std::string>& pool,
                               std::size_t count) {
  std::string out;
  for (std::size_t i = 0; i < count; ++i) {
    if (i > 0) out += ' ';
    out += pool[rng_below(rng, pool.size())];
  }
  return out;
}

}  // namespace detail

inline ReviewGraph synth_graph(const SynthConfig& cfg) {
  static const char* kCommon[] = {"the",  "this", "it",    "really", "good",
                                  "great", "works", "well", "quality", "price",
                                  "would", "again", "happy", "not",   "bad"};
  std::vector<std::string> common(std::begin(kCommon), std::end(kCommon));

  double total = 0.0;
  for (const auto& [size, p] : cfg.profile_dist) total += p;
  if (total <= 0.0) throw InvalidConfigError("profile distribution is empty");

  std::mt19937_64 rng(mix64(cfg.seed));
  ReviewGraph g;
  std::size_t next_review = 0;
  for (std::size_t u = 0; u < cfg.users; ++u) {
    // Sample the own-review count from the configured marginals.
    double x = double(rng_below(rng, 1u << 30)) / double(1u << 30) * total;
    int profile_size = cfg.profile_dist.back().first;
    for (const auto& [size, p] : cfg.profile_dist) {
      if (x < p) {
        profile_size = size;
        break;
      }
      x -= p;
    }
    char user_id[24];
    std::snprintf(user_id, sizeof(user_id), "u%06zu", u);
    for (int k = 0; k < profile_size; ++k) {
      // Quadratic skew concentrates edges on low item indexes, which yields
      // the heavy-tailed item degrees the split sampler needs.
      double v = double(rng_below(rng, 1u << 30)) / double(1u << 30);
      std::size_t item = std::size_t(v * v * double(cfg.items));
      if (item >= cfg.items) item = cfg.items - 1;
      char item_id[24];
      std::snprintf(item_id, sizeof(item_id), "p%06zu", item);

      // Item- and user-flavored words give the rankers real signal.
      std::vector<std::string> flavored = common;
      flavored.push_back("item" + std::to_string(item));
      flavored.push_back("feature" + std::to_string(item % 17));
      flavored.push_back("style" + std::to_string(u % 23));

      Review r;
      r.user = user_id;
      r.item = item_id;
      r.title = detail::synth_words(rng, flavored, 2 + rng_below(rng, 3));
      r.text = detail::synth_words(rng, flavored, 8 + rng_below(rng, 12));
      r.rating = int(1 + rng_below(rng, 5));
      char rid[24];
      std::snprintf(rid, sizeof(rid), "r%08zu", next_review++);
      r.review_id = rid;
      g.add_review(std::move(r));
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Splits

enum class Split { kTrain, kVal, kTest };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

inline Split split_from_string(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val" || s == "validation") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw UnknownSplitError(std::string(s));
}

struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;

  std::size_t total() const { return train + val + test; }
  std::size_t operator[](std::size_t i) const {
    return i == 0 ? train : i == 1 ? val : test;
  }
};

struct ManifestSample {
  std::string sample_id;
  std::string user;
  std::string item;
  std::string review_id;
};

// Profile-size bins 1, 2, 3, >=4. Table-style corpora have mean profile
// sizes near 1.1, so finer bins would be empty.
inline std::size_t profile_size_bin(std::size_t own_reviews) {
  if (own_reviews <= 3) return own_reviews - 1;
  return 3;
}

constexpr std::array<const char*, 4> kBinLabels = {"1", "2", "3", "4+"};

struct StratSplitReport {
  std::array<std::size_t, 4> bin_counts{};
  double chi_square_distance = 0.0;
};

struct SplitManifest {
  std::uint64_t seed = 0;
  SplitSizes sizes;
  double strat_threshold = 0.0;
  std::array<std::size_t, 4> global_bin_counts{};
  std::array<StratSplitReport, 3> strat;
  std::array<std::vector<ManifestSample>, 3> samples;
  std::array<std::string, 3> graph_files;

  const std::vector<ManifestSample>& samples_of(Split s) const {
    return samples[static_cast<std::size_t>(s)];
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["sizes"] = {{"train", sizes.train}, {"val", sizes.val},
                  {"test", sizes.test}};
    nlohmann::ordered_json strat_json;
    strat_json["bins"] = kBinLabels;
    strat_json["threshold"] = strat_threshold;
    strat_json["global_counts"] = global_bin_counts;
    for (std::size_t s = 0; s < 3; ++s) {
      nlohmann::ordered_json sj;
      sj["counts"] = strat[s].bin_counts;
      sj["chi_square_distance"] = strat[s].chi_square_distance;
      strat_json[to_string(static_cast<Split>(s))] = sj;
    }
    j["stratification"] = strat_json;
    for (std::size_t s = 0; s < 3; ++s) {
      const char* name = to_string(static_cast<Split>(s));
      j["graph_files"][name] = graph_files[s];
      nlohmann::ordered_json list = nlohmann::ordered_json::array();
      for (const auto& sample : samples[s]) {
        list.push_back({{"sample_id", sample.sample_id},
                        {"user", sample.user},
                        {"item", sample.item},
                        {"review_id", sample.review_id}});
      }
      j["splits"][name] = list;
    }
    return j;
  }

  static SplitManifest from_json(const nlohmann::json& j) {
    SplitManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.sizes.train = j.at("sizes").at("train").get<std::size_t>();
    m.sizes.val = j.at("sizes").at("val").get<std::size_t>();
    m.sizes.test = j.at("sizes").at("test").get<std::size_t>();
    const auto& strat = j.at("stratification");
    m.strat_threshold = strat.value("threshold", 0.0);
    if (strat.contains("global_counts")) {
      for (std::size_t b = 0; b < 4; ++b) {
        m.global_bin_counts[b] = strat["global_counts"].at(b).get<std::size_t>();
      }
    }
    for (std::size_t s = 0; s < 3; ++s) {
      const char* name = to_string(static_cast<Split>(s));
      if (strat.contains(name)) {
        for (std::size_t b = 0; b < 4; ++b) {
          m.strat[s].bin_counts[b] =
              strat[name].at("counts").at(b).get<std::size_t>();
        }
        m.strat[s].chi_square_distance =
            strat[name].value("chi_square_distance", 0.0);
      }
      m.graph_files[s] = j.at("graph_files").at(name).get<std::string>();
      for (const auto& sj : j.at("splits").at(name)) {
        ManifestSample sample;
        sample.sample_id = sj.at("sample_id").get<std::string>();
        sample.user = sj.at("user").get<std::string>();
        sample.item = sj.at("item").get<std::string>();
        sample.review_id = sj.at("review_id").get<std::string>();
        m.samples[s].push_back(std::move(sample));
      }
    }
    return m;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw UnreadableInputError(path);
    out << to_json().dump(2) << '\n';
  }

  static SplitManifest load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UnreadableInputError(path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
  }
};

struct SplitResult {
  SplitManifest manifest;
  std::array<ReviewGraph, 3> graphs;
};

namespace detail {

// Largest-remainder allocation of `n` slots across the split fractions.
inline std::array<std::size_t, 3> allocate(std::size_t n,
                                           const std::array<double, 3>& frac) {
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    double exact = frac[s] * double(n);
    counts[s] = std::size_t(exact);
    remainder[s] = exact - double(counts[s]);
    assigned += counts[s];
  }
  while (assigned < n) {
    std::size_t best = 0;
    for (std::size_t s = 1; s < 3; ++s) {
      if (remainder[s] > remainder[best]) best = s;
    }
    ++counts[best];
    remainder[best] = -1.0;
    ++assigned;
  }
  return counts;
}

inline double chi_square_distance(const std::array<std::size_t, 4>& a,
                                  const std::array<std::size_t, 4>& b) {
  double na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    na += double(a[i]);
    nb += double(b[i]);
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  double d = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    double p = double(a[i]) / na;
    double q = double(b[i]) / nb;
    if (p + q > 0.0) d += (p - q) * (p - q) / (p + q);
  }
  return 0.5 * d;
}

}  // namespace detail

// Partitions users across splits (stratified by profile-size bin), then
// samples one target review per selected user such that the target item has
// at least one review by another user inside the same split.
inline SplitResult make_splits(const ReviewGraph& graph, SplitSizes sizes,
                               std::uint64_t seed,
                               double strat_threshold = 0.05) {
  if (sizes.total() == 0) throw InfeasibleSizesError("all sizes are zero");

  std::vector<std::string> users = graph.users_in_order();
  std::array<std::vector<std::string>, 4> bins;
  for (const auto& u : users) {
    bins[profile_size_bin(graph.user_degree(u))].push_back(u);
  }

  std::array<double, 3> frac{};
  for (std::size_t s = 0; s < 3; ++s) {
    frac[s] = double(sizes[s]) / double(sizes.total());
  }

  SplitResult result;
  result.manifest.seed = seed;
  result.manifest.sizes = sizes;
  result.manifest.strat_threshold = strat_threshold;

  std::array<std::vector<std::string>, 3> split_users;
  std::mt19937_64 rng(mix64(seed));
  for (std::size_t b = 0; b < 4; ++b) {
    result.manifest.global_bin_counts[b] = bins[b].size();
    deterministic_shuffle(bins[b], rng);
    auto counts = detail::allocate(bins[b].size(), frac);
    std::size_t offset = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t i = 0; i < counts[s]; ++i) {
        split_users[s].push_back(bins[b][offset + i]);
        result.manifest.strat[s].bin_counts[b] += 1;
      }
      offset += counts[s];
    }
  }

  std::array<std::unordered_map<std::string, std::size_t>, 3> user_split_lookup;
  for (std::size_t s = 0; s < 3; ++s) {
    for (const auto& u : split_users[s]) user_split_lookup[s][u] = 1;
  }

  // Per-split graphs keep global insertion order.
  for (const auto& r : graph.edges()) {
    for (std::size_t s = 0; s < 3; ++s) {
      if (user_split_lookup[s].count(r.user) > 0) {
        result.graphs[s].add_review(r);
        break;
      }
    }
  }

  for (std::size_t s = 0; s < 3; ++s) {
    result.manifest.strat[s].chi_square_distance = detail::chi_square_distance(
        result.manifest.strat[s].bin_counts, result.manifest.global_bin_counts);
    if (sizes[s] > 0 &&
        result.manifest.strat[s].chi_square_distance > strat_threshold) {
      throw StratificationError(
          std::string(to_string(static_cast<Split>(s))) + " distance " +
          std::to_string(result.manifest.strat[s].chi_square_distance) +
          " > " + std::to_string(strat_threshold));
    }
  }

  for (std::size_t s = 0; s < 3; ++s) {
    const ReviewGraph& sg = result.graphs[s];
    // A user is eligible if some own review's item has another reviewer
    // in this split; the target is drawn among those reviews.
    std::vector<std::pair<std::string, std::size_t>> eligible;
    for (const auto& u : sg.users_in_order()) {
      std::vector<std::size_t> candidates;
      for (std::size_t idx : sg.user_edge_indexes(u)) {
        const auto& item = sg.review_at(idx).item;
        for (std::size_t other : sg.item_edge_indexes(item)) {
          if (sg.review_at(other).user != u) {
            candidates.push_back(idx);
            break;
          }
        }
      }
      if (candidates.empty()) continue;
      std::mt19937_64 pick_rng(derive_seed(seed, "target/" + u));
      eligible.emplace_back(u, candidates[rng_below(pick_rng, candidates.size())]);
    }
    if (eligible.size() < sizes[s]) {
      throw InfeasibleSizesError(
          std::string(to_string(static_cast<Split>(s))) + " needs " +
          std::to_string(sizes[s]) + " samples but only " +
          std::to_string(eligible.size()) + " users have an in-split neighbor");
    }
    std::mt19937_64 select_rng(
        derive_seed(seed, std::string("select/") + to_string(static_cast<Split>(s))));
    deterministic_shuffle(eligible, select_rng);
    eligible.resize(sizes[s]);
    std::sort(eligible.begin(), eligible.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });
    for (std::size_t i = 0; i < eligible.size(); ++i) {
      const Review& r = sg.review_at(eligible[i].second);
      ManifestSample sample;
      char id[32];
      std::snprintf(id, sizeof(id), "%s-%06zu",
                    to_string(static_cast<Split>(s)), i);
      sample.sample_id = id;
      sample.user = r.user;
      sample.item = r.item;
      sample.review_id = r.review_id;
      result.manifest.samples[s].push_back(std::move(sample));
    }
  }
  return result;
}

// Writes manifest.json plus the three per-split graph files into `dir`.
inline void save_split_result(SplitResult& result, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t s = 0; s < 3; ++s) {
    std::string name =
        std::string(to_string(static_cast<Split>(s))) + "_graph.jsonl";
    result.manifest.graph_files[s] = name;
    result.graphs[s].save_jsonl((std::filesystem::path(dir) / name).string());
  }
  result.manifest.save((std::filesystem::path(dir) / "manifest.json").string());
}

// ---------------------------------------------------------------------------
// Materialization

struct MaterializeResult {
  std::vector<BenchSample> samples;
  std::size_t dropped_empty_target = 0;
};

inline MaterializeResult materialize(const TaskSpec& task,
                                     const SplitManifest& manifest, Split split,
                                     const ReviewGraph& split_graph) {
  MaterializeResult out;
  for (const auto& ms : manifest.samples_of(split)) {
    auto edge = split_graph.find_review(ms.review_id);
    if (!edge) {
      throw Error("manifest sample " + ms.sample_id +
                  " references review missing from split graph: " +
                  ms.review_id);
    }
    const Review& r = split_graph.review_at(*edge);
    BenchSample sample;
    sample.sample_id = ms.sample_id;
    sample.user = ms.user;
    sample.item = ms.item;
    sample.target_review_id = ms.review_id;
    sample.input = task_input(task, r);
    if (task.type == TaskType::kOrdinal) {
      if (!r.rating) {
        ++out.dropped_empty_target;
        continue;
      }
      sample.target_rating = r.rating;
    } else {
      sample.target_text = task_target_text(task, r);
      if (sample.target_text.empty()) {
        ++out.dropped_empty_target;
        continue;
      }
    }
    out.samples.push_back(std::move(sample));
  }
  return out;
}

}  // namespace pgraph
