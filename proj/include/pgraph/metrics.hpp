#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pgraph/errors.hpp"
#include "pgraph/stemmer.hpp"
#include "pgraph/text.hpp"

namespace pgraph {

struct TextScore {
  double rouge1_f = 0.0;
  double rougeL_f = 0.0;
  double meteor = 0.0;
};

struct RatingScore {
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t parse_failures = 0;
};

namespace detail {

inline double f1(double precision, double recall) {
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

inline std::size_t lcs_length(const std::vector<std::string>& a,
                              const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1]) {
        cur[j] = prev[j - 1] + 1;
      } else {
        cur[j] = std::max(prev[j], cur[j - 1]);
      }
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace detail

// Unigram F1 with clipped counts. Tokenization is the shared retrieval
// tokenizer. Both sides empty scores 0 by convention.
inline double rouge1(std::string_view candidate, std::string_view reference) {
  auto cand = tokenize(candidate);
  auto ref = tokenize(reference);
  if (cand.empty() || ref.empty()) return 0.0;
  std::unordered_map<std::string, std::size_t> ref_counts;
  for (const auto& t : ref) ++ref_counts[t];
  std::size_t overlap = 0;
  for (const auto& t : cand) {
    auto it = ref_counts.find(t);
    if (it != ref_counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  double p = double(overlap) / double(cand.size());
  double r = double(overlap) / double(ref.size());
  return detail::f1(p, r);
}

// LCS-based F1 over token sequences.
inline double rougeL(std::string_view candidate, std::string_view reference) {
  auto cand = tokenize(candidate);
  auto ref = tokenize(reference);
  if (cand.empty() || ref.empty()) return 0.0;
  std::size_t lcs = detail::lcs_length(cand, ref);
  double p = double(lcs) / double(cand.size());
  double r = double(lcs) / double(ref.size());
  return detail::f1(p, r);
}

namespace meteor_params {
constexpr double kAlpha = 0.9;  // F_mean = PR / (alpha*P + (1-alpha)*R)
constexpr double kBeta = 3.0;   // fragmentation exponent
constexpr double kGamma = 0.5;  // fragmentation weight
}  // namespace meteor_params

// METEOR with exact and Porter-stem matching stages, no synonym stage.
// Matching is greedy left to right within each stage: each candidate token
// takes the first still-unmatched reference token it can pair with.
inline double meteor(std::string_view candidate, std::string_view reference) {
  auto cand = tokenize(candidate);
  auto ref = tokenize(reference);
  if (cand.empty() || ref.empty()) return 0.0;

  std::vector<int> match_of(cand.size(), -1);
  std::vector<bool> ref_used(ref.size(), false);

  for (std::size_t i = 0; i < cand.size(); ++i) {
    for (std::size_t j = 0; j < ref.size(); ++j) {
      if (!ref_used[j] && ref[j] == cand[i]) {
        match_of[i] = int(j);
        ref_used[j] = true;
        break;
      }
    }
  }
  std::vector<std::string> ref_stems(ref.size());
  for (std::size_t j = 0; j < ref.size(); ++j) ref_stems[j] = porter_stem(ref[j]);
  for (std::size_t i = 0; i < cand.size(); ++i) {
    if (match_of[i] != -1) continue;
    std::string stem = porter_stem(cand[i]);
    for (std::size_t j = 0; j < ref.size(); ++j) {
      if (!ref_used[j] && ref_stems[j] == stem) {
        match_of[i] = int(j);
        ref_used[j] = true;
        break;
      }
    }
  }

  std::size_t matches = 0;
  std::size_t chunks = 0;
  int prev_i = -2, prev_j = -2;
  for (std::size_t i = 0; i < cand.size(); ++i) {
    if (match_of[i] == -1) continue;
    ++matches;
    if (int(i) != prev_i + 1 || match_of[i] != prev_j + 1) ++chunks;
    prev_i = int(i);
    prev_j = match_of[i];
  }
  if (matches == 0) return 0.0;

  double p = double(matches) / double(cand.size());
  double r = double(matches) / double(ref.size());
  double f_mean = p * r / (meteor_params::kAlpha * p +
                           (1.0 - meteor_params::kAlpha) * r);
  double frag = double(chunks) / double(matches);
  double penalty =
      meteor_params::kGamma * std::pow(frag, meteor_params::kBeta);
  return f_mean * (1.0 - penalty);
}

inline TextScore score_text(std::string_view candidate,
                            std::string_view reference) {
  return {rouge1(candidate, reference), rougeL(candidate, reference),
          meteor(candidate, reference)};
}

// First standalone integer in 1..5 wins; spelled-out digits count too.
// "Standalone" means no adjacent alphanumeric character.
inline std::optional<int> parse_rating(std::string_view generation) {
  static const std::pair<const char*, int> kWords[] = {
      {"one", 1}, {"two", 2}, {"three", 3}, {"four", 4}, {"five", 5}};
  auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
  auto is_alpha = [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
  };
  auto is_alnum = [&](char c) { return is_digit(c) || is_alpha(c); };

  std::size_t i = 0;
  while (i < generation.size()) {
    char c = generation[i];
    if (is_digit(c)) {
      bool bounded_left = i == 0 || !is_alnum(generation[i - 1]);
      std::size_t j = i;
      while (j < generation.size() && is_digit(generation[j])) ++j;
      bool bounded_right = j == generation.size() || !is_alnum(generation[j]);
      if (bounded_left && bounded_right && j - i == 1) {
        int value = c - '0';
        if (value >= 1 && value <= 5) return value;
      }
      i = j;
    } else if (is_alpha(c)) {
      bool bounded_left = i == 0 || !is_alnum(generation[i - 1]);
      std::size_t j = i;
      std::string word;
      while (j < generation.size() && is_alpha(generation[j])) {
        char lc = generation[j];
        if (lc >= 'A' && lc <= 'Z') lc = char(lc + 32);
        word.push_back(lc);
        ++j;
      }
      bool bounded_right = j == generation.size() || !is_alnum(generation[j]);
      if (bounded_left && bounded_right) {
        for (const auto& [w, value] : kWords) {
          if (word == w) return value;
        }
      }
      i = j;
    } else {
      ++i;
    }
  }
  return std::nullopt;
}

inline RatingScore mae_rmse(const std::vector<int>& preds,
                            const std::vector<int>& targets) {
  if (preds.size() != targets.size()) {
    throw Error("mae_rmse: prediction/target length mismatch");
  }
  if (preds.empty()) throw EmptyAfterExclusionError();
  double abs_sum = 0.0, sq_sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    double d = double(preds[i]) - double(targets[i]);
    abs_sum += std::abs(d);
    sq_sum += d * d;
  }
  RatingScore s;
  s.mae = abs_sum / double(preds.size());
  s.rmse = std::sqrt(sq_sum / double(preds.size()));
  return s;
}

// Parse failures are excluded from the means and counted, never imputed.
inline RatingScore mae_rmse(const std::vector<std::optional<int>>& preds,
                            const std::vector<int>& targets) {
  if (preds.size() != targets.size()) {
    throw Error("mae_rmse: prediction/target length mismatch");
  }
  std::vector<int> kept_preds, kept_targets;
  std::size_t failures = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i]) {
      kept_preds.push_back(*preds[i]);
      kept_targets.push_back(targets[i]);
    } else {
      ++failures;
    }
  }
  if (kept_preds.empty()) throw EmptyAfterExclusionError();
  RatingScore s = mae_rmse(kept_preds, kept_targets);
  s.parse_failures = failures;
  return s;
}

}  // namespace pgraph
