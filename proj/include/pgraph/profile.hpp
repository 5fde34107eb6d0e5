#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "pgraph/graph.hpp"

namespace pgraph {

enum class EntrySource { kOwn, kNeighbor };

inline const char* to_string(EntrySource s) {
  return s == EntrySource::kOwn ? "own" : "neighbor";
}

struct ProfileEntry {
  std::size_t edge_index = 0;  // position in the graph edge list
  EntrySource source = EntrySource::kOwn;
};

// Candidate pool for one user: their own reviews plus reviews of the same
// items written by other users. Entries are ordered by graph insertion order
// and deduplicated by review id.
struct UserProfile {
  std::string user;
  std::vector<ProfileEntry> entries;

  std::vector<ProfileEntry> own_entries() const { return filter(EntrySource::kOwn); }
  std::vector<ProfileEntry> neighbor_entries() const {
    return filter(EntrySource::kNeighbor);
  }

 private:
  std::vector<ProfileEntry> filter(EntrySource s) const {
    std::vector<ProfileEntry> out;
    for (const auto& e : entries) {
      if (e.source == s) out.push_back(e);
    }
    return out;
  }
};

// Builds the profile for `user`. When `exclude_review_id` names a held-out
// target review, that entry is dropped from the pool, but the edge still
// counts for the neighbor expansion: reviews of the target item by other
// users remain reachable. That is the whole signal for cold-start users.
inline UserProfile build_profile(
    const ReviewGraph& graph, const std::string& user,
    const std::optional<std::string>& exclude_review_id = std::nullopt) {
  if (!graph.has_user(user)) throw UnknownUserError(user);

  UserProfile profile;
  profile.user = user;

  const auto& own = graph.user_edge_indexes(user);
  std::unordered_set<std::size_t> picked;
  std::vector<ProfileEntry> entries;
  entries.reserve(own.size());

  for (std::size_t idx : own) {
    if (exclude_review_id &&
        graph.review_at(idx).review_id == *exclude_review_id) {
      continue;
    }
    if (picked.insert(idx).second) {
      entries.push_back({idx, EntrySource::kOwn});
    }
  }
  for (std::size_t own_idx : own) {
    const auto& item = graph.review_at(own_idx).item;
    for (std::size_t idx : graph.item_edge_indexes(item)) {
      if (graph.review_at(idx).user == user) continue;
      if (exclude_review_id &&
          graph.review_at(idx).review_id == *exclude_review_id) {
        continue;
      }
      if (picked.insert(idx).second) {
        entries.push_back({idx, EntrySource::kNeighbor});
      }
    }
  }

  std::sort(entries.begin(), entries.end(),
            [](const ProfileEntry& a, const ProfileEntry& b) {
              return a.edge_index < b.edge_index;
            });
  profile.entries = std::move(entries);
  return profile;
}

}  // namespace pgraph
