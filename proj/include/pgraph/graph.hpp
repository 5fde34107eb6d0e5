#pragma once

#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "pgraph/errors.hpp"

namespace pgraph {

// One edge of the bipartite user-item graph: a review with its payload.
struct Review {
  std::string user;
  std::string item;
  std::string title;
  std::string text;
  std::optional<int> rating;  // 1..5 when present
  std::string review_id;
};

struct GraphStats {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t edges = 0;
  double avg_degree = 0.0;  // 2|E| / (|U| + |V|)
};

inline double average_degree(std::size_t users, std::size_t items,
                             std::size_t edges) {
  std::size_t nodes = users + items;
  return nodes == 0 ? 0.0 : 2.0 * double(edges) / double(nodes);
}

// User-centric bipartite review graph. Users and items are created on first
// reference; edges are a multiset kept in insertion order, which is the
// canonical tie-break order for everything downstream. Build single-writer,
// then freeze() before sharing across readers.
class ReviewGraph {
 public:
  void add_review(Review r) {
    if (frozen_) throw FrozenGraphError();
    if (r.user.empty()) throw EmptyIdentifierError("user");
    if (r.item.empty()) throw EmptyIdentifierError("item");
    if (r.review_id.empty()) throw EmptyIdentifierError("review_id");
    if (r.rating && (*r.rating < 1 || *r.rating > 5)) {
      throw Error("rating out of range: " + std::to_string(*r.rating));
    }
    if (by_review_id_.count(r.review_id) > 0) {
      throw DuplicateReviewIdError(r.review_id);
    }
    // User and item id namespaces must stay disjoint.
    if (by_item_.count(r.user) > 0) {
      throw Error("id used as both user and item: " + r.user);
    }
    if (by_user_.count(r.item) > 0) {
      throw Error("id used as both user and item: " + r.item);
    }
    std::size_t idx = edges_.size();
    by_review_id_.emplace(r.review_id, idx);
    by_user_[r.user].push_back(idx);
    by_item_[r.item].push_back(idx);
    edges_.push_back(std::move(r));
  }

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  std::size_t user_count() const { return by_user_.size(); }
  std::size_t item_count() const { return by_item_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  bool has_user(std::string_view id) const {
    return by_user_.count(std::string(id)) > 0;
  }
  bool has_item(std::string_view id) const {
    return by_item_.count(std::string(id)) > 0;
  }

  GraphStats stats() const {
    GraphStats s;
    s.users = user_count();
    s.items = item_count();
    s.edges = edge_count();
    s.avg_degree = average_degree(s.users, s.items, s.edges);
    return s;
  }

  const Review& review_at(std::size_t edge_index) const {
    return edges_.at(edge_index);
  }

  const std::vector<Review>& edges() const { return edges_; }

  // Edge indexes in insertion order.
  const std::vector<std::size_t>& user_edge_indexes(const std::string& user) const {
    auto it = by_user_.find(user);
    if (it == by_user_.end()) throw UnknownIdError(user);
    return it->second;
  }
  const std::vector<std::size_t>& item_edge_indexes(const std::string& item) const {
    auto it = by_item_.find(item);
    if (it == by_item_.end()) throw UnknownIdError(item);
    return it->second;
  }

  std::vector<Review> user_reviews(const std::string& user) const {
    return gather(user_edge_indexes(user));
  }
  std::vector<Review> item_neighbors(const std::string& item) const {
    return gather(item_edge_indexes(item));
  }

  std::size_t user_degree(const std::string& user) const {
    return user_edge_indexes(user).size();
  }

  std::optional<std::size_t> find_review(const std::string& review_id) const {
    auto it = by_review_id_.find(review_id);
    if (it == by_review_id_.end()) return std::nullopt;
    return it->second;
  }

  // Users in first-seen order.
  std::vector<std::string> users_in_order() const {
    std::vector<std::string> out;
    std::unordered_map<std::string, bool> seen;
    out.reserve(by_user_.size());
    for (const auto& r : edges_) {
      if (!seen[r.user]) {
        seen[r.user] = true;
        out.push_back(r.user);
      }
    }
    return out;
  }

  void save_jsonl(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw UnreadableInputError(path);
    for (const auto& r : edges_) {
      out << review_to_json(r).dump() << '\n';
    }
  }

  static ReviewGraph load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UnreadableInputError(path);
    ReviewGraph g;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        g.add_review(review_from_json(nlohmann::json::parse(line)));
      } catch (const nlohmann::json::exception& e) {
        throw Error(path + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
    return g;
  }

  static nlohmann::ordered_json review_to_json(const Review& r) {
    nlohmann::ordered_json j;
    j["user_id"] = r.user;
    j["item_id"] = r.item;
    j["review_id"] = r.review_id;
    j["title"] = r.title;
    j["text"] = r.text;
    if (r.rating) {
      j["rating"] = *r.rating;
    } else {
      j["rating"] = nullptr;
    }
    return j;
  }

  static Review review_from_json(const nlohmann::json& j) {
    Review r;
    r.user = j.at("user_id").get<std::string>();
    r.item = j.at("item_id").get<std::string>();
    r.review_id = j.at("review_id").get<std::string>();
    r.title = j.value("title", std::string());
    r.text = j.value("text", std::string());
    if (j.contains("rating") && !j["rating"].is_null()) {
      r.rating = j["rating"].get<int>();
    }
    return r;
  }

 private:
  std::vector<Review> gather(const std::vector<std::size_t>& idx) const {
    std::vector<Review> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(edges_[i]);
    return out;
  }

  std::vector<Review> edges_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_user_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_item_;
  std::unordered_map<std::string, std::size_t> by_review_id_;
  bool frozen_ = false;
};

}  // namespace pgraph
