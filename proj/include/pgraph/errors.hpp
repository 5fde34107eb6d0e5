#pragma once

#include <stdexcept>
#include <string>

namespace pgraph {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DuplicateReviewIdError : Error {
  explicit DuplicateReviewIdError(const std::string& id)
      : Error("duplicate review_id: " + id) {}
};

struct EmptyIdentifierError : Error {
  explicit EmptyIdentifierError(const std::string& what)
      : Error("empty identifier: " + what) {}
};

struct FrozenGraphError : Error {
  FrozenGraphError() : Error("graph is frozen; mutation rejected") {}
};

struct UnknownIdError : Error {
  explicit UnknownIdError(const std::string& id) : Error("unknown id: " + id) {}
};

struct UnknownUserError : Error {
  explicit UnknownUserError(const std::string& id)
      : Error("unknown user: " + id) {}
};

struct MissingFieldError : Error {
  explicit MissingFieldError(const std::string& what)
      : Error("missing field: " + what) {}
};

struct InvalidConfigError : Error {
  explicit InvalidConfigError(const std::string& what)
      : Error("invalid config: " + what) {}
};

struct EmbedderError : Error {
  explicit EmbedderError(const std::string& what)
      : Error("embedder failure: " + what) {}
};

struct TemplateMismatchError : Error {
  explicit TemplateMismatchError(const std::string& what)
      : Error("template mismatch: " + what) {}
};

struct UnreadableInputError : Error {
  explicit UnreadableInputError(const std::string& path)
      : Error("unreadable input: " + path) {}
};

struct EmptySchemaMapError : Error {
  EmptySchemaMapError() : Error("schema map is empty") {}
};

struct InfeasibleSizesError : Error {
  explicit InfeasibleSizesError(const std::string& what)
      : Error("infeasible split sizes: " + what) {}
};

struct StratificationError : Error {
  explicit StratificationError(const std::string& what)
      : Error("stratification threshold exceeded: " + what) {}
};

struct UnknownSplitError : Error {
  explicit UnknownSplitError(const std::string& name)
      : Error("unknown split: " + name) {}
};

struct EmptyAfterExclusionError : Error {
  EmptyAfterExclusionError()
      : Error("no rating predictions left after excluding parse failures") {}
};

struct MismatchedReportsError : Error {
  explicit MismatchedReportsError(const std::string& what)
      : Error("mismatched reports: " + what) {}
};

}  // namespace pgraph
