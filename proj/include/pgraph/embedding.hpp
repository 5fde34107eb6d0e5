#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pgraph/errors.hpp"
#include "pgraph/hash.hpp"

namespace pgraph {

// Produces one fixed-dimension vector per token. Implementations must be
// deterministic for a given configuration; the dense ranker mean-pools the
// token vectors into a document vector.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dimension() const = 0;
  virtual std::vector<std::vector<double>> embed_tokens(
      const std::vector<std::string>& tokens) = 0;
};

// Seeded hash-projection embedder for offline runs and tests: every token
// maps to a reproducible pseudo-random vector in [-1, 1]^dim.
class HashEmbedder final : public EmbeddingProvider {
 public:
  explicit HashEmbedder(std::size_t dim = 64, std::uint64_t seed = 0)
      : dim_(dim), seed_(seed) {}

  std::size_t dimension() const override { return dim_; }

  std::vector<std::vector<double>> embed_tokens(
      const std::vector<std::string>& tokens) override {
    std::vector<std::vector<double>> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
      std::vector<double> v(dim_);
      std::uint64_t base = fnv1a64(t, seed_ ^ 1469598103934665603ull);
      for (std::size_t d = 0; d < dim_; ++d) {
        std::uint64_t h = mix64(base + d);
        v[d] = 2.0 * (double(h) / double(UINT64_MAX)) - 1.0;
      }
      out.push_back(std::move(v));
    }
    return out;
  }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

inline double cosine_similarity(const std::vector<double>& a,
                                const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw EmbedderError("dimension mismatch: " + std::to_string(a.size()) +
                        " vs " + std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline std::vector<double> mean_pool(
    const std::vector<std::vector<double>>& vectors, std::size_t dim) {
  std::vector<double> mean(dim, 0.0);
  if (vectors.empty()) return mean;
  for (const auto& v : vectors) {
    if (v.size() != dim) {
      throw EmbedderError("token vector has dimension " +
                          std::to_string(v.size()) + ", expected " +
                          std::to_string(dim));
    }
    for (std::size_t d = 0; d < dim; ++d) mean[d] += v[d];
  }
  for (double& x : mean) x /= double(vectors.size());
  return mean;
}

}  // namespace pgraph
