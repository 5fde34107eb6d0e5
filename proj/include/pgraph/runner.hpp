#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "pgraph/dataset.hpp"
#include "pgraph/embedding_http.hpp"
#include "pgraph/gateway.hpp"
#include "pgraph/metrics.hpp"
#include "pgraph/prompt.hpp"
#include "pgraph/retrieval.hpp"
#include "pgraph/tasks.hpp"

namespace pgraph {

struct RunConfig {
  int task_id = 1;
  Strategy strategy = Strategy::kPGraphRag;
  Ranker ranker = Ranker::kBm25;
  int k = 4;
  std::string model_id = "offline-mock";
  Split split = Split::kTest;
  std::uint64_t seed = 0;
  int parallelism = 1;
  std::string cache_dir;   // empty disables the response cache
  std::string output_dir = "out";

  std::string manifest_path;   // manifest.json; split graphs resolve relative
  std::string templates_path;  // empty selects the built-in templates
  std::string backend = "echo";
  double temperature = 0.4;
  int max_tokens = 512;
  std::optional<int> length_constraint_words;
  int token_budget = 0;

  int retry_max_attempts = 3;
  int retry_backoff_ms = 200;
  int rate_limit_requests = 0;
  int rate_limit_window_ms = 1000;

  std::string embedder = "hash";
  std::size_t embedding_dim = 64;

  std::optional<std::size_t> subsample;  // cap on evaluated samples

  static RunConfig from_json(const nlohmann::json& j) {
    RunConfig c;
    c.task_id = j.at("task_id").get<int>();
    task_by_id(c.task_id);
    c.strategy = strategy_from_string(j.value("strategy", "pgraphrag"));
    c.ranker = ranker_from_string(j.value("ranker", "bm25"));
    c.k = j.value("k", 4);
    c.model_id = j.value("model_id", "offline-mock");
    c.split = split_from_string(j.value("split", "test"));
    c.seed = j.value("seed", std::uint64_t(0));
    c.parallelism = j.value("parallelism", 1);
    c.cache_dir = j.value("cache_dir", "");
    c.output_dir = j.value("output_dir", "out");
    c.manifest_path = j.value("manifest", "");
    c.templates_path = j.value("templates", "");
    c.backend = j.value("backend", "echo");
    c.temperature = j.value("temperature", 0.4);
    c.max_tokens = j.value("max_tokens", 512);
    if (j.contains("length_constraint_words")) {
      c.length_constraint_words = j["length_constraint_words"].get<int>();
    }
    c.token_budget = j.value("token_budget", 0);
    c.retry_max_attempts = j.value("retry_max_attempts", 3);
    c.retry_backoff_ms = j.value("retry_backoff_ms", 200);
    c.rate_limit_requests = j.value("rate_limit_requests", 0);
    c.rate_limit_window_ms = j.value("rate_limit_window_ms", 1000);
    c.embedder = j.value("embedder", "hash");
    c.embedding_dim = j.value("embedding_dim", std::size_t(64));
    if (j.contains("subsample")) {
      c.subsample = j["subsample"].get<std::size_t>();
    }
    c.validate();
    return c;
  }

  static RunConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UnreadableInputError(path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
  }

  void validate() const {
    task_by_id(task_id);
    if (strategy != Strategy::kNone && k < 1) {
      throw InvalidConfigError("k must be >= 1");
    }
    if (parallelism < 1) throw InvalidConfigError("parallelism must be >= 1");
    if (max_tokens < 1) throw InvalidConfigError("max_tokens must be >= 1");
    if (temperature < 0.0) throw InvalidConfigError("temperature must be >= 0");
    if (manifest_path.empty()) throw InvalidConfigError("manifest is required");
  }
};

struct RetrievedRef {
  std::string review_id;
  double score = 0.0;
};

// One evaluated sample, reproducible from (config, manifest, cache).
struct RunRecord {
  std::string sample_id;
  std::string prompt;
  std::vector<RetrievedRef> retrieved;
  std::string generation;
  std::string reference;
  std::optional<TextScore> text_score;
  std::optional<int> predicted_rating;
  std::optional<int> target_rating;
  std::optional<std::string> error;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["sample_id"] = sample_id;
    j["prompt"] = prompt;
    nlohmann::ordered_json refs = nlohmann::ordered_json::array();
    for (const auto& r : retrieved) {
      refs.push_back({{"review_id", r.review_id}, {"score", r.score}});
    }
    j["retrieved"] = refs;
    j["generation"] = generation;
    j["reference"] = reference;
    if (text_score) {
      j["scores"] = {{"rouge1", text_score->rouge1_f},
                     {"rougeL", text_score->rougeL_f},
                     {"meteor", text_score->meteor}};
    }
    if (target_rating) {
      j["target_rating"] = *target_rating;
      if (predicted_rating) {
        j["predicted_rating"] = *predicted_rating;
      } else {
        j["predicted_rating"] = nullptr;
      }
    }
    if (error) {
      j["error"] = *error;
    } else {
      j["error"] = nullptr;
    }
    return j;
  }

  static RunRecord from_json(const nlohmann::json& j) {
    RunRecord r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.prompt = j.value("prompt", "");
    if (j.contains("retrieved")) {
      for (const auto& e : j["retrieved"]) {
        r.retrieved.push_back({e.at("review_id").get<std::string>(),
                               e.at("score").get<double>()});
      }
    }
    r.generation = j.value("generation", "");
    r.reference = j.value("reference", "");
    if (j.contains("scores")) {
      TextScore s;
      s.rouge1_f = j["scores"].value("rouge1", 0.0);
      s.rougeL_f = j["scores"].value("rougeL", 0.0);
      s.meteor = j["scores"].value("meteor", 0.0);
      r.text_score = s;
    }
    if (j.contains("target_rating") && !j["target_rating"].is_null()) {
      r.target_rating = j["target_rating"].get<int>();
      if (j.contains("predicted_rating") && !j["predicted_rating"].is_null()) {
        r.predicted_rating = j["predicted_rating"].get<int>();
      }
    }
    if (j.contains("error") && !j["error"].is_null()) {
      r.error = j["error"].get<std::string>();
    }
    return r;
  }
};

struct MetricReport {
  int task_id = 0;
  std::string task_name;
  std::string strategy;
  std::string ranker;
  int k = 0;
  std::string model_id;
  std::string split;
  std::string backend;
  std::uint64_t seed = 0;
  std::size_t n_samples = 0;
  std::size_t n_errors = 0;
  std::size_t dropped_empty_target = 0;

  std::optional<double> rouge1;
  std::optional<double> rougeL;
  std::optional<double> meteor;
  std::optional<double> mae;
  std::optional<double> rmse;
  std::size_t parse_failures = 0;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["task_id"] = task_id;
    j["task_name"] = task_name;
    j["strategy"] = strategy;
    j["ranker"] = ranker;
    j["k"] = k;
    j["model_id"] = model_id;
    j["split"] = split;
    j["backend"] = backend;
    j["seed"] = seed;
    j["n_samples"] = n_samples;
    j["n_errors"] = n_errors;
    j["dropped_empty_target"] = dropped_empty_target;
    nlohmann::ordered_json m;
    auto put = [&](const char* name, const std::optional<double>& v) {
      if (v) {
        m[name] = *v;
      } else {
        m[name] = nullptr;
      }
    };
    put("rouge1", rouge1);
    put("rougeL", rougeL);
    put("meteor", meteor);
    put("mae", mae);
    put("rmse", rmse);
    m["parse_failures"] = parse_failures;
    j["metrics"] = m;
    return j;
  }

  static MetricReport from_json(const nlohmann::json& j) {
    MetricReport r;
    r.task_id = j.at("task_id").get<int>();
    r.task_name = j.value("task_name", "");
    r.strategy = j.value("strategy", "");
    r.ranker = j.value("ranker", "");
    r.k = j.value("k", 0);
    r.model_id = j.value("model_id", "");
    r.split = j.value("split", "");
    r.backend = j.value("backend", "");
    r.seed = j.value("seed", std::uint64_t(0));
    r.n_samples = j.value("n_samples", std::size_t(0));
    r.n_errors = j.value("n_errors", std::size_t(0));
    r.dropped_empty_target = j.value("dropped_empty_target", std::size_t(0));
    const auto& m = j.at("metrics");
    auto get = [&](const char* name) -> std::optional<double> {
      if (!m.contains(name) || m[name].is_null()) return std::nullopt;
      return m[name].get<double>();
    };
    r.rouge1 = get("rouge1");
    r.rougeL = get("rougeL");
    r.meteor = get("meteor");
    r.mae = get("mae");
    r.rmse = get("rmse");
    r.parse_failures = m.value("parse_failures", std::size_t(0));
    return r;
  }

  static const char* csv_header() {
    return "task_id,task_name,strategy,ranker,k,model_id,split,n_samples,"
           "n_errors,rouge1,rougeL,meteor,mae,rmse,parse_failures";
  }

  std::string csv_row() const {
    auto fmt = [](const std::optional<double>& v) -> std::string {
      if (!v) return "";
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.6f", *v);
      return buf;
    };
    std::ostringstream row;
    row << task_id << ",\"" << task_name << "\"," << strategy << "," << ranker
        << "," << k << "," << model_id << "," << split << "," << n_samples
        << "," << n_errors << "," << fmt(rouge1) << "," << fmt(rougeL) << ","
        << fmt(meteor) << "," << fmt(mae) << "," << fmt(rmse) << ","
        << parse_failures;
    return row.str();
  }

  void save(const std::string& dir) const {
    std::filesystem::create_directories(dir);
    std::ofstream json_out(std::filesystem::path(dir) / "report.json");
    json_out << to_json().dump(2) << '\n';
    std::ofstream csv_out(std::filesystem::path(dir) / "report.csv");
    csv_out << csv_header() << '\n' << csv_row() << '\n';
  }

  static MetricReport load(const std::string& path_or_dir) {
    std::filesystem::path p(path_or_dir);
    if (std::filesystem::is_directory(p)) p /= "report.json";
    std::ifstream in(p);
    if (!in) throw UnreadableInputError(p.string());
    nlohmann::json j;
    in >> j;
    return from_json(j);
  }
};

namespace detail {

inline std::vector<RunRecord> load_records(const std::string& path) {
  std::vector<RunRecord> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(RunRecord::from_json(nlohmann::json::parse(line)));
  }
  return out;
}

}  // namespace detail

struct RunOutcome {
  MetricReport report;
  std::uint64_t backend_calls = 0;
  std::size_t resumed = 0;
};

// Full pipeline for one (task, strategy, ranker, k, model, split) cell:
// profile -> query -> retrieve -> assemble -> generate -> score. Per-sample
// failures are recorded and never abort the run; reruns resume from the
// records file without recomputation.
inline RunOutcome run(const RunConfig& cfg) {
  cfg.validate();
  const TaskSpec& task = task_by_id(cfg.task_id);

  SplitManifest manifest = SplitManifest::load(cfg.manifest_path);
  std::filesystem::path manifest_dir =
      std::filesystem::path(cfg.manifest_path).parent_path();
  std::string graph_file =
      manifest.graph_files[static_cast<std::size_t>(cfg.split)];
  ReviewGraph graph =
      ReviewGraph::load_jsonl((manifest_dir / graph_file).string());
  graph.freeze();

  TemplateSet templates = cfg.templates_path.empty()
                              ? default_templates()
                              : TemplateSet::load(cfg.templates_path);
  const PromptTemplate& tpl = templates.for_task(task.id);

  MaterializeResult materialized =
      materialize(task, manifest, cfg.split, graph);
  std::vector<BenchSample>& samples = materialized.samples;

  if (cfg.subsample && *cfg.subsample < samples.size()) {
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(derive_seed(cfg.seed, "subsample"));
    deterministic_shuffle(order, rng);
    order.resize(*cfg.subsample);
    std::sort(order.begin(), order.end());
    std::vector<BenchSample> kept;
    kept.reserve(order.size());
    for (std::size_t i : order) kept.push_back(std::move(samples[i]));
    samples = std::move(kept);
  }

  std::filesystem::create_directories(cfg.output_dir);
  std::string records_path =
      (std::filesystem::path(cfg.output_dir) / "records.jsonl").string();
  std::unordered_map<std::string, RunRecord> done;
  for (auto& r : detail::load_records(records_path)) {
    done.emplace(r.sample_id, std::move(r));
  }

  GatewayConfig gw_cfg;
  gw_cfg.backend = make_backend(cfg.backend);
  gw_cfg.cache_dir = cfg.cache_dir;
  gw_cfg.retry.max_attempts = cfg.retry_max_attempts;
  gw_cfg.retry.initial_backoff_ms = cfg.retry_backoff_ms;
  gw_cfg.rate_limit_requests = cfg.rate_limit_requests;
  gw_cfg.rate_limit_window_ms = cfg.rate_limit_window_ms;
  LlmGateway gateway(gw_cfg);

  std::unique_ptr<EmbeddingProvider> embedder;
  if (cfg.ranker == Ranker::kDense) {
    if (cfg.embedder == "hash") {
      embedder = std::make_unique<HashEmbedder>(cfg.embedding_dim, cfg.seed);
    } else if (cfg.embedder == "http") {
      embedder = HttpEmbedder::from_env(cfg.embedding_dim);
    } else {
      throw InvalidConfigError("unknown embedder: " + cfg.embedder);
    }
  }

  RetrievalConfig rcfg;
  rcfg.strategy = cfg.strategy;
  rcfg.ranker = cfg.ranker;
  rcfg.k = cfg.k;
  rcfg.seed = cfg.seed;

  AssembleOptions assemble_opts;
  assemble_opts.length_constraint_words = cfg.length_constraint_words;
  assemble_opts.token_budget = cfg.token_budget;

  // Stage 1: deterministic retrieval and prompt assembly, serial.
  struct Pending {
    std::size_t sample_index = 0;
    RunRecord record;
    std::optional<GenRequest> request;
  };
  std::vector<Pending> pending;
  std::size_t resumed = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const BenchSample& sample = samples[i];
    if (done.count(sample.sample_id) > 0) {
      ++resumed;
      continue;
    }
    Pending p;
    p.sample_index = i;
    p.record.sample_id = sample.sample_id;
    if (task.type == TaskType::kOrdinal) {
      p.record.target_rating = sample.target_rating;
      p.record.reference = std::to_string(*sample.target_rating);
    } else {
      p.record.reference = sample.target_text;
    }
    try {
      Query q = query_of(task, sample);
      RetrievedContext ctx =
          retrieve(rcfg, graph, sample.user, q, sample.target_review_id,
                   embedder.get(), sample.sample_id);
      for (const auto& e : ctx.entries) {
        p.record.retrieved.push_back(
            {graph.review_at(e.entry.edge_index).review_id, e.score});
      }
      AssembledPrompt prompt =
          assemble(tpl, task, sample.input, ctx, graph, assemble_opts);
      if (prompt.over_budget) {
        std::fprintf(stderr, "warning: sample %s prompt estimate %d over budget %d\n",
                     sample.sample_id.c_str(), prompt.token_estimate,
                     cfg.token_budget);
      }
      p.record.prompt = prompt.text;
      GenRequest req;
      req.prompt = std::move(prompt);
      req.temperature = cfg.temperature;
      req.max_tokens = cfg.max_tokens;
      req.model_id = cfg.model_id;
      p.request = std::move(req);
    } catch (const Error& e) {
      p.record.error = e.what();
    }
    pending.push_back(std::move(p));
  }

  // Stages 2+3: bounded-parallel generation with positional alignment, then
  // serial scoring. Chunked so records persist as the run progresses and a
  // crashed run resumes from the last flushed chunk.
  std::ofstream records_out(records_path, std::ios::app);
  std::size_t chunk_size =
      std::max<std::size_t>(32, std::size_t(cfg.parallelism) * 8);
  for (std::size_t begin = 0; begin < pending.size(); begin += chunk_size) {
    std::size_t end = std::min(pending.size(), begin + chunk_size);
    std::vector<GenRequest> requests;
    for (std::size_t i = begin; i < end; ++i) {
      if (pending[i].request) requests.push_back(*pending[i].request);
    }
    std::vector<GenResult> results =
        gateway.generate_batch(requests, cfg.parallelism);
    std::size_t req_index = 0;
    for (std::size_t i = begin; i < end; ++i) {
      Pending& p = pending[i];
      if (p.request) {
        const GenResult& result = results[req_index++];
        if (result.ok()) {
          p.record.generation = result.response->text;
          if (task.type == TaskType::kOrdinal) {
            p.record.predicted_rating = parse_rating(p.record.generation);
          } else {
            p.record.text_score =
                score_text(p.record.generation, p.record.reference);
          }
        } else {
          p.record.error = std::string(to_string(result.error->kind)) + ": " +
                           result.error->message;
        }
      }
      records_out << p.record.to_json().dump() << '\n';
      done.emplace(p.record.sample_id, p.record);
    }
    records_out.flush();
  }
  records_out.close();

  // Aggregate in manifest order so reports are byte-stable.
  MetricReport report;
  report.task_id = task.id;
  report.task_name = task.name;
  report.strategy = to_string(cfg.strategy);
  report.ranker = to_string(cfg.ranker);
  report.k = cfg.k;
  report.model_id = cfg.model_id;
  report.split = to_string(cfg.split);
  report.backend = cfg.backend;
  report.seed = cfg.seed;
  report.dropped_empty_target = materialized.dropped_empty_target;

  double r1 = 0.0, rl = 0.0, mt = 0.0;
  std::size_t text_n = 0;
  std::vector<std::optional<int>> preds;
  std::vector<int> targets;
  for (const auto& sample : samples) {
    auto it = done.find(sample.sample_id);
    if (it == done.end()) continue;
    const RunRecord& rec = it->second;
    ++report.n_samples;
    if (rec.error) {
      ++report.n_errors;
      continue;
    }
    if (task.type == TaskType::kOrdinal) {
      preds.push_back(rec.predicted_rating);
      targets.push_back(rec.target_rating.value_or(0));
    } else if (rec.text_score) {
      r1 += rec.text_score->rouge1_f;
      rl += rec.text_score->rougeL_f;
      mt += rec.text_score->meteor;
      ++text_n;
    }
  }
  if (task.type == TaskType::kOrdinal) {
    try {
      RatingScore rs = mae_rmse(preds, targets);
      report.mae = rs.mae;
      report.rmse = rs.rmse;
      report.parse_failures = rs.parse_failures;
    } catch (const EmptyAfterExclusionError&) {
      report.parse_failures = preds.size();
    }
  } else if (text_n > 0) {
    report.rouge1 = r1 / double(text_n);
    report.rougeL = rl / double(text_n);
    report.meteor = mt / double(text_n);
  }

  report.save(cfg.output_dir);

  RunOutcome outcome;
  outcome.report = report;
  outcome.backend_calls = gateway.backend_calls();
  outcome.resumed = resumed;
  return outcome;
}

// ---------------------------------------------------------------------------
// Comparison and sweeps

// Task x strategy matrix per metric; the best value per metric is flagged
// with '*' (all tied entries flagged '=').
inline std::string compare(const std::vector<MetricReport>& reports) {
  if (reports.size() < 2) {
    throw MismatchedReportsError("need at least two reports");
  }
  for (const auto& r : reports) {
    if (r.task_id != reports[0].task_id || r.split != reports[0].split) {
      throw MismatchedReportsError(
          "reports must share task and split; got task " +
          std::to_string(r.task_id) + "/" + r.split + " vs task " +
          std::to_string(reports[0].task_id) + "/" + reports[0].split);
    }
  }

  struct MetricRow {
    const char* name;
    bool lower_is_better;
    std::optional<double> MetricReport::*field;
  };
  static const MetricRow kRows[] = {
      {"ROUGE-1", false, &MetricReport::rouge1},
      {"ROUGE-L", false, &MetricReport::rougeL},
      {"METEOR", false, &MetricReport::meteor},
      {"MAE", true, &MetricReport::mae},
      {"RMSE", true, &MetricReport::rmse},
  };

  std::vector<std::string> labels;
  for (const auto& r : reports) {
    std::string label = r.strategy;
    if (r.strategy != "none" && r.strategy != "random") {
      label += "/" + r.ranker + "/k=" + std::to_string(r.k);
    }
    labels.push_back(label);
  }

  std::ostringstream out;
  out << "Task " << reports[0].task_id << ": " << reports[0].task_name << " ["
      << reports[0].split << "]\n";
  std::size_t width = 10;
  for (const auto& l : labels) width = std::max(width, l.size() + 2);
  out << std::string(10, ' ');
  for (const auto& l : labels) {
    out << l << std::string(width - l.size(), ' ');
  }
  out << '\n';

  for (const auto& row : kRows) {
    bool any = false;
    for (const auto& r : reports) {
      if (r.*row.field) any = true;
    }
    if (!any) continue;
    std::optional<double> best;
    std::size_t best_count = 0;
    for (const auto& r : reports) {
      const auto& v = r.*row.field;
      if (!v) continue;
      if (!best || (row.lower_is_better ? *v < *best : *v > *best)) {
        best = *v;
        best_count = 1;
      } else if (*v == *best) {
        ++best_count;
      }
    }
    out << row.name << std::string(10 - std::string(row.name).size(), ' ');
    for (const auto& r : reports) {
      const auto& v = r.*row.field;
      std::string cell;
      if (!v) {
        cell = "-";
      } else {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4f", *v);
        cell = buf;
        if (best && *v == *best) cell += best_count > 1 ? "=" : "*";
      }
      out << cell << std::string(width > cell.size() ? width - cell.size() : 1, ' ');
    }
    out << '\n';
  }
  return out.str();
}

struct SweepOptions {
  std::vector<int> ks = {1, 2, 4};
  std::vector<Ranker> rankers = {Ranker::kBm25, Ranker::kDense};
  std::string metric = "rouge1";
  std::optional<std::size_t> subsample;
};

struct SweepOutcome {
  RunConfig best_config;
  MetricReport best_report;
  std::vector<MetricReport> reports;
};

inline std::optional<double> metric_value(const MetricReport& r,
                                          const std::string& name) {
  if (name == "rouge1") return r.rouge1;
  if (name == "rougeL") return r.rougeL;
  if (name == "meteor") return r.meteor;
  if (name == "mae") return r.mae;
  if (name == "rmse") return r.rmse;
  throw InvalidConfigError("unknown metric: " + name);
}

// Validation-style tuning: run the (ranker x k) grid and keep the argmax
// (argmin for rating metrics) of the chosen metric.
inline SweepOutcome sweep(const RunConfig& base, const SweepOptions& opts) {
  bool lower_is_better = opts.metric == "mae" || opts.metric == "rmse";
  SweepOutcome outcome;
  bool have_best = false;
  double best_value = 0.0;
  for (Ranker ranker : opts.rankers) {
    for (int k : opts.ks) {
      RunConfig cfg = base;
      cfg.ranker = ranker;
      cfg.k = k;
      cfg.subsample = opts.subsample ? opts.subsample : base.subsample;
      cfg.output_dir = (std::filesystem::path(base.output_dir) / "sweep" /
                        (std::string(to_string(ranker)) + "-k" +
                         std::to_string(k)))
                           .string();
      RunOutcome run_outcome = run(cfg);
      outcome.reports.push_back(run_outcome.report);
      auto v = metric_value(run_outcome.report, opts.metric);
      if (!v) continue;
      if (!have_best || (lower_is_better ? *v < best_value : *v > best_value)) {
        have_best = true;
        best_value = *v;
        outcome.best_config = cfg;
        outcome.best_report = run_outcome.report;
      }
    }
  }
  if (!have_best) {
    throw InvalidConfigError("sweep produced no value for metric " +
                             opts.metric);
  }
  return outcome;
}

}  // namespace pgraph
