#pragma once

#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "pgraph/embedding.hpp"
#include "pgraph/errors.hpp"

namespace pgraph {

// JSON-over-HTTP embedding-service client. Sends the token list as the
// "input" array of an embeddings request and expects one vector per token in
// "data[i].embedding" (the interoperable embeddings shape).
class HttpEmbedder final : public EmbeddingProvider {
 public:
  HttpEmbedder(std::string base_url, std::string api_key, std::string model,
               std::size_t dimension, int timeout_seconds = 60)
      : api_key_(std::move(api_key)),
        model_(std::move(model)),
        dim_(dimension),
        timeout_seconds_(timeout_seconds) {
    auto scheme_end = base_url.find("://");
    std::size_t host_start =
        scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto slash = base_url.find('/', host_start);
    if (slash == std::string::npos) {
      host_ = base_url;
    } else {
      host_ = base_url.substr(0, slash);
      path_prefix_ = base_url.substr(slash);
      while (!path_prefix_.empty() && path_prefix_.back() == '/') {
        path_prefix_.pop_back();
      }
    }
  }

  // PGRAPH_EMBED_BASE_URL, PGRAPH_EMBED_API_KEY, PGRAPH_EMBED_MODEL.
  static std::unique_ptr<HttpEmbedder> from_env(std::size_t dimension) {
    const char* base = std::getenv("PGRAPH_EMBED_BASE_URL");
    if (base == nullptr || *base == '\0') {
      throw InvalidConfigError("PGRAPH_EMBED_BASE_URL is not set");
    }
    const char* key = std::getenv("PGRAPH_EMBED_API_KEY");
    const char* model = std::getenv("PGRAPH_EMBED_MODEL");
    return std::make_unique<HttpEmbedder>(base, key ? key : "",
                                          model ? model : "", dimension);
  }

  std::size_t dimension() const override { return dim_; }

  std::vector<std::vector<double>> embed_tokens(
      const std::vector<std::string>& tokens) override {
    if (tokens.empty()) return {};
    nlohmann::json body;
    if (!model_.empty()) body["model"] = model_;
    body["input"] = tokens;

    httplib::Client cli(host_);
    cli.set_connection_timeout(timeout_seconds_, 0);
    cli.set_read_timeout(timeout_seconds_, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) {
      headers.emplace("Authorization", "Bearer " + api_key_);
    }
    auto res = cli.Post(path_prefix_ + "/embeddings", headers, body.dump(),
                        "application/json");
    if (!res) {
      throw EmbedderError("transport: " + httplib::to_string(res.error()));
    }
    if (res->status >= 400) {
      throw EmbedderError("service status " + std::to_string(res->status) +
                          ": " + res->body);
    }
    try {
      auto j = nlohmann::json::parse(res->body);
      const auto& data = j.at("data");
      if (data.size() != tokens.size()) {
        throw EmbedderError("expected " + std::to_string(tokens.size()) +
                            " vectors, got " + std::to_string(data.size()));
      }
      std::vector<std::vector<double>> out;
      out.reserve(data.size());
      for (const auto& entry : data) {
        auto v = entry.at("embedding").get<std::vector<double>>();
        if (v.size() != dim_) {
          throw EmbedderError("service returned dimension " +
                              std::to_string(v.size()) + ", expected " +
                              std::to_string(dim_));
        }
        out.push_back(std::move(v));
      }
      return out;
    } catch (const nlohmann::json::exception& e) {
      throw EmbedderError(std::string("unparseable embedding body: ") +
                          e.what());
    }
  }

 private:
  std::string host_;
  std::string path_prefix_;
  std::string api_key_;
  std::string model_;
  std::size_t dim_;
  int timeout_seconds_;
};

}  // namespace pgraph
