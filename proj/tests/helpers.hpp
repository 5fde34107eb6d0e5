#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "pgraph/graph.hpp"
#include "pgraph/hash.hpp"

namespace testutil {

inline pgraph::Review make_review(std::string user, std::string item,
                                  std::string id, std::string title = "title",
                                  std::string text = "text",
                                  std::optional<int> rating = std::nullopt) {
  pgraph::Review r;
  r.user = std::move(user);
  r.item = std::move(item);
  r.review_id = std::move(id);
  r.title = std::move(title);
  r.text = std::move(text);
  r.rating = rating;
  return r;
}

// Random bipartite graph with up to `max_edges` edges. Multi-edges allowed.
inline pgraph::ReviewGraph random_graph(std::mt19937_64& rng,
                                        std::size_t max_edges,
                                        std::size_t users = 12,
                                        std::size_t items = 8) {
  pgraph::ReviewGraph g;
  std::size_t edges = 1 + pgraph::rng_below(rng, max_edges);
  static const char* kWords[] = {"red", "blue", "fast", "slow", "loud",
                                 "soft", "warm", "cold", "new", "old"};
  for (std::size_t e = 0; e < edges; ++e) {
    std::string user = "u" + std::to_string(pgraph::rng_below(rng, users));
    std::string item = "p" + std::to_string(pgraph::rng_below(rng, items));
    std::string title = kWords[pgraph::rng_below(rng, 10)];
    std::string text = std::string(kWords[pgraph::rng_below(rng, 10)]) + " " +
                       kWords[pgraph::rng_below(rng, 10)];
    g.add_review(make_review(user, item, "r" + std::to_string(e), title, text,
                             int(1 + pgraph::rng_below(rng, 5))));
  }
  return g;
}

class TempDir {
 public:
  TempDir() {
    auto base = std::filesystem::temp_directory_path();
    for (int i = 0; i < 1000; ++i) {
      auto candidate =
          base / ("pgraph_test_" + std::to_string(counter().fetch_add(1)));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("could not create temp dir");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& child = "") const {
    return child.empty() ? path_.string() : (path_ / child).string();
  }

 private:
  static std::atomic<std::uint64_t>& counter() {
    static std::atomic<std::uint64_t> c{0};
    return c;
  }
  std::filesystem::path path_;
};

}  // namespace testutil
