#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pgraph/errors.hpp"
#include "pgraph/graph.hpp"
#include "pgraph/retrieval.hpp"
#include "pgraph/tasks.hpp"

namespace pgraph {

// Modular per-task template. {context}, {input} and {length_constraint} bind
// in the instruction; {title}, {text} and {rating} bind per context entry.
struct PromptTemplate {
  int task_id = 0;
  TaskType task_type = TaskType::kLongGen;
  std::string instruction;
  std::string no_context_instruction;
  std::string context_entry_format;
};

struct AssembleOptions {
  std::optional<int> length_constraint_words;  // short tasks; default 5
  int token_budget = 0;                        // 0 disables the budget guard
};

struct AssembledPrompt {
  std::string text;
  int token_estimate = 0;
  int context_count = 0;
  std::vector<std::string> context_texts;  // raw entry texts in rank order
  bool over_budget = false;
};

namespace detail {

// Single-pass substitution; replaced values are never rescanned, so review
// text containing brace markers cannot inject placeholders.
inline std::string render_template(
    std::string_view tmpl,
    const std::vector<std::pair<std::string_view, std::string>>& binds) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      std::size_t close = tmpl.find('}', i);
      if (close != std::string_view::npos) {
        std::string_view name = tmpl.substr(i + 1, close - i - 1);
        bool bound = false;
        for (const auto& [k, v] : binds) {
          if (k == name) {
            out += v;
            bound = true;
            break;
          }
        }
        if (bound) {
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i]);
    ++i;
  }
  return out;
}

inline void check_placeholders(std::string_view tmpl,
                               std::initializer_list<std::string_view> known,
                               const std::string& where) {
  std::size_t i = 0;
  while ((i = tmpl.find('{', i)) != std::string_view::npos) {
    std::size_t close = tmpl.find('}', i);
    if (close == std::string_view::npos) break;
    std::string_view name = tmpl.substr(i + 1, close - i - 1);
    bool ok = false;
    for (auto k : known) {
      if (k == name) ok = true;
    }
    if (!ok && name.find(' ') == std::string_view::npos && !name.empty()) {
      throw Error(where + ": unknown placeholder {" + std::string(name) + "}");
    }
    i = close + 1;
  }
}

}  // namespace detail

class TemplateSet {
 public:
  static TemplateSet from_json(const nlohmann::json& j) {
    TemplateSet set;
    set.version_ = j.value("version", 0);
    for (const auto& t : j.at("templates")) {
      PromptTemplate tpl;
      tpl.task_id = t.at("task_id").get<int>();
      tpl.task_type = task_type_from_string(t.at("task_type").get<std::string>());
      tpl.instruction = t.at("instruction").get<std::string>();
      tpl.no_context_instruction = t.at("no_context_instruction").get<std::string>();
      tpl.context_entry_format = t.at("context_entry_format").get<std::string>();
      detail::check_placeholders(tpl.instruction,
                                 {"context", "input", "length_constraint"},
                                 "task " + std::to_string(tpl.task_id));
      detail::check_placeholders(tpl.no_context_instruction,
                                 {"input", "length_constraint"},
                                 "task " + std::to_string(tpl.task_id));
      detail::check_placeholders(tpl.context_entry_format,
                                 {"title", "text", "rating"},
                                 "task " + std::to_string(tpl.task_id));
      set.templates_[tpl.task_id] = std::move(tpl);
    }
    return set;
  }

  static TemplateSet load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UnreadableInputError(path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
  }

  const PromptTemplate& for_task(int task_id) const {
    auto it = templates_.find(task_id);
    if (it == templates_.end()) {
      throw InvalidConfigError("no template for task " + std::to_string(task_id));
    }
    return it->second;
  }

  int version() const { return version_; }

 private:
  int version_ = 0;
  std::map<int, PromptTemplate> templates_;
};

// Built-in template set, identical to templates/pgraph_templates.json.
inline const char* default_templates_json() {
  return R"JSON({
  "version": 1,
  "templates": [
    {
      "task_id": 1,
      "task_type": "long_gen",
      "instruction": "You write product reviews on behalf of a specific user. Reviews related to this user:\n{context}\nWrite the product review this user would write for the review title below.\nReview title: {input}\nReview:",
      "no_context_instruction": "You write product reviews on behalf of a specific user.\nWrite the product review this user would write for the review title below.\nReview title: {input}\nReview:",
      "context_entry_format": "Title: {title} | Review: {text} | Rating: {rating}"
    },
    {
      "task_id": 2,
      "task_type": "long_gen",
      "instruction": "You write hotel experience stories on behalf of a specific guest. Experiences related to this guest:\n{context}\nWrite the hotel experience this guest would write for the summary below.\nSummary: {input}\nExperience:",
      "no_context_instruction": "You write hotel experience stories on behalf of a specific guest.\nWrite the hotel experience this guest would write for the summary below.\nSummary: {input}\nExperience:",
      "context_entry_format": "Summary: {title} | Experience: {text} | Rating: {rating}"
    },
    {
      "task_id": 3,
      "task_type": "long_gen",
      "instruction": "You write feedback on behalf of a specific user, preserving their writing style. Feedback related to this user:\n{context}\nWrite the feedback this user would write for the feedback title below.\nFeedback title: {input}\nFeedback:",
      "no_context_instruction": "You write feedback on behalf of a specific user, preserving their writing style.\nWrite the feedback this user would write for the feedback title below.\nFeedback title: {input}\nFeedback:",
      "context_entry_format": "Title: {title} | Feedback: {text} | Rating: {rating}"
    },
    {
      "task_id": 4,
      "task_type": "long_gen",
      "instruction": "You write product reviews in Brazilian Portuguese on behalf of a specific user. Reviews related to this user:\n{context}\nWrite, in Portuguese, the product review this user would write for the review title below.\nReview title: {input}\nReview:",
      "no_context_instruction": "You write product reviews in Brazilian Portuguese on behalf of a specific user.\nWrite, in Portuguese, the product review this user would write for the review title below.\nReview title: {input}\nReview:",
      "context_entry_format": "Title: {title} | Review: {text} | Rating: {rating}"
    },
    {
      "task_id": 5,
      "task_type": "short_gen",
      "instruction": "You write review titles on behalf of a specific user. Reviews related to this user:\n{context}\nWrite the title this user would give the review below. Answer with at most {length_constraint} words.\nReview: {input}\nTitle:",
      "no_context_instruction": "You write review titles on behalf of a specific user.\nWrite the title this user would give the review below. Answer with at most {length_constraint} words.\nReview: {input}\nTitle:",
      "context_entry_format": "Title: {title} | Review: {text} | Rating: {rating}"
    },
    {
      "task_id": 6,
      "task_type": "short_gen",
      "instruction": "You summarize hotel experiences on behalf of a specific guest. Experiences related to this guest:\n{context}\nWrite the summary this guest would give the experience below. Answer with at most {length_constraint} words.\nExperience: {input}\nSummary:",
      "no_context_instruction": "You summarize hotel experiences on behalf of a specific guest.\nWrite the summary this guest would give the experience below. Answer with at most {length_constraint} words.\nExperience: {input}\nSummary:",
      "context_entry_format": "Summary: {title} | Experience: {text} | Rating: {rating}"
    },
    {
      "task_id": 7,
      "task_type": "short_gen",
      "instruction": "You write feedback titles on behalf of a specific user, preserving their writing style. Feedback related to this user:\n{context}\nWrite the title this user would give the feedback below. Answer with at most {length_constraint} words.\nFeedback: {input}\nTitle:",
      "no_context_instruction": "You write feedback titles on behalf of a specific user, preserving their writing style.\nWrite the title this user would give the feedback below. Answer with at most {length_constraint} words.\nFeedback: {input}\nTitle:",
      "context_entry_format": "Title: {title} | Feedback: {text} | Rating: {rating}"
    },
    {
      "task_id": 8,
      "task_type": "short_gen",
      "instruction": "You write review titles in Brazilian Portuguese on behalf of a specific user. Reviews related to this user:\n{context}\nWrite, in Portuguese, the title this user would give the review below. Answer with at most {length_constraint} words.\nReview: {input}\nTitle:",
      "no_context_instruction": "You write review titles in Brazilian Portuguese on behalf of a specific user.\nWrite, in Portuguese, the title this user would give the review below. Answer with at most {length_constraint} words.\nReview: {input}\nTitle:",
      "context_entry_format": "Title: {title} | Review: {text} | Rating: {rating}"
    },
    {
      "task_id": 9,
      "task_type": "ordinal",
      "instruction": "You predict product ratings for a specific user. Reviews related to this user:\n{context}\nPredict the rating this user gives the review below, on a scale from 1 to 5. Answer with a single integer from 1 to 5 and nothing else.\nReview: {input}\nRating:",
      "no_context_instruction": "You predict product ratings for a specific user.\nPredict the rating this user gives the review below, on a scale from 1 to 5. Answer with a single integer from 1 to 5 and nothing else.\nReview: {input}\nRating:",
      "context_entry_format": "Title: {title} | Review: {text} | Rating: {rating}"
    },
    {
      "task_id": 10,
      "task_type": "ordinal",
      "instruction": "You predict hotel ratings for a specific guest. Experiences related to this guest:\n{context}\nPredict the rating this guest gives the experience below, on a scale from 1 to 5. Answer with a single integer from 1 to 5 and nothing else.\nExperience: {input}\nRating:",
      "no_context_instruction": "You predict hotel ratings for a specific guest.\nPredict the rating this guest gives the experience below, on a scale from 1 to 5. Answer with a single integer from 1 to 5 and nothing else.\nExperience: {input}\nRating:",
      "context_entry_format": "Summary: {title} | Experience: {text} | Rating: {rating}"
    },
    {
      "task_id": 11,
      "task_type": "ordinal",
      "instruction": "You predict feedback ratings for a specific user. Feedback related to this user:\n{context}\nPredict the rating this user gives the feedback below, on a scale from 1 to 5. Answer with a single integer from 1 to 5 and nothing else.\nFeedback: {input}\nRating:",
      "no_context_instruction": "You predict feedback ratings for a specific user.\nPredict the rating this user gives the feedback below, on a scale from 1 to 5. Answer with a single integer from 1 to 5 and nothing else.\nFeedback: {input}\nRating:",
      "context_entry_format": "Title: {title} | Feedback: {text} | Rating: {rating}"
    },
    {
      "task_id": 12,
      "task_type": "ordinal",
      "instruction": "You predict product ratings for a specific user reviewing in Brazilian Portuguese. Reviews related to this user:\n{context}\nPredict the rating this user gives the review below, on a scale from 1 to 5. Answer with a single integer from 1 to 5 and nothing else.\nReview: {input}\nRating:",
      "no_context_instruction": "You predict product ratings for a specific user reviewing in Brazilian Portuguese.\nPredict the rating this user gives the review below, on a scale from 1 to 5. Answer with a single integer from 1 to 5 and nothing else.\nReview: {input}\nRating:",
      "context_entry_format": "Title: {title} | Review: {text} | Rating: {rating}"
    }
  ]
})JSON";
}

inline const TemplateSet& default_templates() {
  static const TemplateSet set =
      TemplateSet::from_json(nlohmann::json::parse(default_templates_json()));
  return set;
}

constexpr int kDefaultShortGenWordLimit = 5;

// Crude budget proxy: roughly four characters per model token.
inline int estimate_tokens(std::string_view text) {
  return int((text.size() + 3) / 4);
}

inline AssembledPrompt assemble(const PromptTemplate& tpl, const TaskSpec& task,
                                const std::string& input,
                                const RetrievedContext& ctx,
                                const ReviewGraph& graph,
                                const AssembleOptions& opts = {}) {
  if (tpl.task_type != task.type) {
    throw TemplateMismatchError("template for " +
                                std::string(to_string(tpl.task_type)) +
                                " used with " + std::string(to_string(task.type)) +
                                " task " + std::to_string(task.id));
  }

  AssembledPrompt out;
  std::string length_words = std::to_string(
      opts.length_constraint_words.value_or(kDefaultShortGenWordLimit));

  if (ctx.entries.empty()) {
    out.text = detail::render_template(
        tpl.no_context_instruction,
        {{"input", input}, {"length_constraint", length_words}});
  } else {
    std::ostringstream block;
    for (std::size_t i = 0; i < ctx.entries.size(); ++i) {
      const Review& r = graph.review_at(ctx.entries[i].entry.edge_index);
      std::string rating = r.rating ? std::to_string(*r.rating) : "-";
      if (i > 0) block << '\n';
      block << (i + 1) << ". "
            << detail::render_template(tpl.context_entry_format,
                                       {{"title", r.title},
                                        {"text", r.text},
                                        {"rating", rating}});
      out.context_texts.push_back(r.text);
    }
    out.text = detail::render_template(tpl.instruction,
                                       {{"context", block.str()},
                                        {"input", input},
                                        {"length_constraint", length_words}});
  }

  out.context_count = ctx.actual_k;
  out.token_estimate = estimate_tokens(out.text);
  out.over_budget = opts.token_budget > 0 && out.token_estimate > opts.token_budget;
  return out;
}

}  // namespace pgraph
