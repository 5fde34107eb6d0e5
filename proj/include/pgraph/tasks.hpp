#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "pgraph/errors.hpp"
#include "pgraph/graph.hpp"
#include "pgraph/retrieval.hpp"

namespace pgraph {

enum class TaskType { kLongGen, kShortGen, kOrdinal };

inline const char* to_string(TaskType t) {
  switch (t) {
    case TaskType::kLongGen: return "long_gen";
    case TaskType::kShortGen: return "short_gen";
    case TaskType::kOrdinal: return "ordinal";
  }
  return "?";
}

inline TaskType task_type_from_string(std::string_view s) {
  if (s == "long_gen") return TaskType::kLongGen;
  if (s == "short_gen") return TaskType::kShortGen;
  if (s == "ordinal") return TaskType::kOrdinal;
  throw InvalidConfigError("unknown task type: " + std::string(s));
}

struct TaskSpec {
  int id = 0;
  const char* name = "";
  TaskType type = TaskType::kLongGen;
  const char* dataset = "";  // which of the four graphs the task runs on
};

// Tasks 1-4 generate review text from the title, 5-8 generate the title from
// the text, 9-12 predict the 1-5 rating from title plus text.
inline const std::array<TaskSpec, 12>& task_catalog() {
  static const std::array<TaskSpec, 12> kTasks = {{
      {1, "User Product Review Generation", TaskType::kLongGen, "user_product"},
      {2, "Hotel Experience Generation", TaskType::kLongGen, "hotel"},
      {3, "Stylized Feedback Generation", TaskType::kLongGen, "stylized"},
      {4, "Multilingual Review Generation", TaskType::kLongGen, "multilingual"},
      {5, "User Product Review Title Generation", TaskType::kShortGen,
       "user_product"},
      {6, "Hotel Experience Summary Generation", TaskType::kShortGen, "hotel"},
      {7, "Stylized Feedback Title Generation", TaskType::kShortGen,
       "stylized"},
      {8, "Multilingual Review Title Generation", TaskType::kShortGen,
       "multilingual"},
      {9, "User Product Review Ratings", TaskType::kOrdinal, "user_product"},
      {10, "Hotel Experience Ratings", TaskType::kOrdinal, "hotel"},
      {11, "Stylized Feedback Ratings", TaskType::kOrdinal, "stylized"},
      {12, "Multilingual Product Ratings", TaskType::kOrdinal, "multilingual"},
  }};
  return kTasks;
}

inline const TaskSpec& task_by_id(int id) {
  if (id < 1 || id > 12) {
    throw InvalidConfigError("task id must be 1..12, got " + std::to_string(id));
  }
  return task_catalog()[static_cast<std::size_t>(id - 1)];
}

// Task input drawn from the review: title for long tasks, text for short
// tasks, title and text joined by a newline for rating tasks.
inline std::string task_input(const TaskSpec& task, const Review& r) {
  switch (task.type) {
    case TaskType::kLongGen:
      return r.title;
    case TaskType::kShortGen:
      return r.text;
    case TaskType::kOrdinal:
      if (r.title.empty()) return r.text;
      if (r.text.empty()) return r.title;
      return r.title + "\n" + r.text;
  }
  return {};
}

inline std::string task_target_text(const TaskSpec& task, const Review& r) {
  switch (task.type) {
    case TaskType::kLongGen:
      return r.text;
    case TaskType::kShortGen:
      return r.title;
    case TaskType::kOrdinal:
      return {};
  }
  return {};
}

// One evaluated benchmark sample.
struct BenchSample {
  std::string sample_id;
  std::string user;
  std::string item;
  std::string target_review_id;
  std::string input;
  std::string target_text;             // text tasks
  std::optional<int> target_rating;    // ordinal tasks
};

// The query is the task input verbatim.
inline Query query_of(const TaskSpec& task, const BenchSample& sample) {
  if (sample.input.empty()) {
    throw MissingFieldError("sample " + sample.sample_id + " has no " +
                            std::string(to_string(task.type)) + " input");
  }
  return Query{sample.input};
}

}  // namespace pgraph
