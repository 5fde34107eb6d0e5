// Command-line front end: graph build/stats, data ingest/split/synth,
// bench run/compare/sweep.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pgraph/dataset.hpp"
#include "pgraph/graph.hpp"
#include "pgraph/runner.hpp"

namespace {

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

std::vector<std::pair<int, double>> parse_profile_dist(const std::string& s) {
  std::vector<std::pair<int, double>> dist;
  for (const auto& part : split_csv(s)) {
    auto colon = part.find(':');
    if (colon == std::string::npos) {
      throw pgraph::InvalidConfigError("profile dist entry needs size:prob, got " + part);
    }
    dist.emplace_back(std::stoi(part.substr(0, colon)),
                      std::stod(part.substr(colon + 1)));
  }
  if (dist.empty()) throw pgraph::InvalidConfigError("empty profile dist");
  return dist;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Personalized graph-based retrieval benchmark toolkit"};
  app.require_subcommand(1);

  // graph ------------------------------------------------------------------
  auto* graph_cmd = app.add_subcommand("graph", "Build and inspect review graphs");
  graph_cmd->require_subcommand(1);

  std::string build_input, build_output;
  auto* graph_build = graph_cmd->add_subcommand("build", "Validate JSONL reviews into a graph file");
  graph_build->add_option("--input", build_input, "Input reviews JSONL")->required();
  graph_build->add_option("--output", build_output, "Output graph file")->required();

  std::string stats_path;
  auto* graph_stats = graph_cmd->add_subcommand("stats", "Print graph statistics");
  graph_stats->add_option("graph", stats_path, "Graph file")->required();

  // data -------------------------------------------------------------------
  auto* data_cmd = app.add_subcommand("data", "Dataset ingestion, splits and synthesis");
  data_cmd->require_subcommand(1);

  std::string ingest_input, ingest_map, ingest_out;
  auto* data_ingest = data_cmd->add_subcommand("ingest", "Ingest a raw corpus via a schema map");
  data_ingest->add_option("--input", ingest_input, "Raw JSONL")->required();
  data_ingest->add_option("--map", ingest_map, "Schema map JSON")->required();
  data_ingest->add_option("--out", ingest_out, "Output graph JSONL")->required();

  std::string split_graph, split_sizes = "20000,2500,2500", split_out = "splits";
  std::uint64_t split_seed = 0;
  double strat_threshold = 0.05;
  auto* data_split = data_cmd->add_subcommand("split", "Make user-disjoint train/val/test splits");
  data_split->add_option("--graph", split_graph, "Graph file")->required();
  data_split->add_option("--sizes", split_sizes, "train,val,test sample counts");
  data_split->add_option("--seed", split_seed, "Split seed");
  data_split->add_option("--out", split_out, "Output directory");
  data_split->add_option("--strat-threshold", strat_threshold,
                         "Max chi-square distance per split");

  std::size_t synth_users = 1000, synth_items = 150;
  std::string synth_dist = "1:0.75,2:0.15,3:0.06,4:0.04", synth_out;
  std::uint64_t synth_seed = 1;
  auto* data_synth = data_cmd->add_subcommand("synth", "Generate a synthetic review corpus");
  data_synth->add_option("--users", synth_users, "User count");
  data_synth->add_option("--items", synth_items, "Item count");
  data_synth->add_option("--profile-dist", synth_dist, "size:prob,... marginals");
  data_synth->add_option("--seed", synth_seed, "Generator seed");
  data_synth->add_option("--out", synth_out, "Output JSONL")->required();

  // bench ------------------------------------------------------------------
  auto* bench_cmd = app.add_subcommand("bench", "Run and compare benchmark cells");
  bench_cmd->require_subcommand(1);

  std::string run_config, run_model, run_backend, run_cache, run_templates;
  double run_temperature = -1.0;
  int run_max_tokens = 0, run_parallelism = 0;
  auto* bench_run = bench_cmd->add_subcommand("run", "Run one benchmark configuration");
  bench_run->add_option("--config", run_config, "Run config JSON")->required();
  bench_run->add_option("--model", run_model, "Override model id");
  bench_run->add_option("--backend", run_backend, "Override backend: http, echo, extractive");
  bench_run->add_option("--temperature", run_temperature, "Override temperature");
  bench_run->add_option("--max-tokens", run_max_tokens, "Override max tokens");
  bench_run->add_option("--parallelism", run_parallelism, "Override parallelism");
  bench_run->add_option("--cache-dir", run_cache, "Override response cache directory");
  bench_run->add_option("--templates", run_templates, "Override template file");

  std::vector<std::string> compare_paths;
  auto* bench_compare = bench_cmd->add_subcommand("compare", "Compare metric reports");
  bench_compare->add_option("reports", compare_paths, "Report files or run directories")
      ->required()
      ->expected(-2);

  std::string sweep_config, sweep_ks = "1,2,4", sweep_rankers = "bm25,dense",
              sweep_metric = "rouge1";
  std::size_t sweep_subsample = 0;
  auto* bench_sweep = bench_cmd->add_subcommand("sweep", "Grid-sweep ranker and k, pick the best");
  bench_sweep->add_option("--config", sweep_config, "Base run config JSON")->required();
  bench_sweep->add_option("--ks", sweep_ks, "Comma-separated k values");
  bench_sweep->add_option("--rankers", sweep_rankers, "Comma-separated rankers");
  bench_sweep->add_option("--metric", sweep_metric, "Selection metric");
  bench_sweep->add_option("--subsample", sweep_subsample, "Evaluate only this many samples");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*graph_build) {
      pgraph::ReviewGraph g = pgraph::ReviewGraph::load_jsonl(build_input);
      g.save_jsonl(build_output);
      auto s = g.stats();
      std::printf("built %s: %zu users, %zu items, %zu edges\n",
                  build_output.c_str(), s.users, s.items, s.edges);
    } else if (*graph_stats) {
      auto s = pgraph::ReviewGraph::load_jsonl(stats_path).stats();
      std::printf("users: %zu\nitems: %zu\nedges: %zu\navg_degree: %.2f\n",
                  s.users, s.items, s.edges, s.avg_degree);
    } else if (*data_ingest) {
      pgraph::SchemaMap map = pgraph::SchemaMap::load(ingest_map);
      pgraph::ReviewGraph g;
      auto stats = pgraph::ingest_file(ingest_input, map, g);
      g.save_jsonl(ingest_out);
      std::printf("rows: %zu, ingested: %zu, malformed: %zu, deduped: %zu\n",
                  stats.rows_read, stats.ingested, stats.skipped_malformed,
                  stats.deduped);
    } else if (*data_split) {
      auto sizes_vec = split_csv(split_sizes);
      if (sizes_vec.size() != 3) {
        throw pgraph::InvalidConfigError("--sizes wants train,val,test");
      }
      pgraph::SplitSizes sizes;
      sizes.train = std::stoull(sizes_vec[0]);
      sizes.val = std::stoull(sizes_vec[1]);
      sizes.test = std::stoull(sizes_vec[2]);
      pgraph::ReviewGraph g = pgraph::ReviewGraph::load_jsonl(split_graph);
      g.freeze();
      auto result = pgraph::make_splits(g, sizes, split_seed, strat_threshold);
      pgraph::save_split_result(result, split_out);
      std::printf("wrote %s/manifest.json (train %zu, val %zu, test %zu)\n",
                  split_out.c_str(), result.manifest.samples[0].size(),
                  result.manifest.samples[1].size(),
                  result.manifest.samples[2].size());
      for (std::size_t s = 0; s < 3; ++s) {
        std::printf("  %s chi-square distance: %.4f\n",
                    pgraph::to_string(static_cast<pgraph::Split>(s)),
                    result.manifest.strat[s].chi_square_distance);
      }
    } else if (*data_synth) {
      pgraph::SynthConfig cfg;
      cfg.users = synth_users;
      cfg.items = synth_items;
      cfg.profile_dist = parse_profile_dist(synth_dist);
      cfg.seed = synth_seed;
      pgraph::ReviewGraph g = pgraph::synth_graph(cfg);
      g.save_jsonl(synth_out);
      auto s = g.stats();
      std::printf("wrote %s: %zu users, %zu items, %zu edges, avg degree %.2f\n",
                  synth_out.c_str(), s.users, s.items, s.edges, s.avg_degree);
    } else if (*bench_run) {
      pgraph::RunConfig cfg = pgraph::RunConfig::load(run_config);
      if (!run_model.empty()) cfg.model_id = run_model;
      if (!run_backend.empty()) cfg.backend = run_backend;
      if (run_temperature >= 0.0) cfg.temperature = run_temperature;
      if (run_max_tokens > 0) cfg.max_tokens = run_max_tokens;
      if (run_parallelism > 0) cfg.parallelism = run_parallelism;
      if (!run_cache.empty()) cfg.cache_dir = run_cache;
      if (!run_templates.empty()) cfg.templates_path = run_templates;
      auto outcome = pgraph::run(cfg);
      std::printf("%s\n", outcome.report.to_json().dump(2).c_str());
      std::printf("backend calls: %llu, resumed: %zu\n",
                  static_cast<unsigned long long>(outcome.backend_calls),
                  outcome.resumed);
    } else if (*bench_compare) {
      std::vector<pgraph::MetricReport> reports;
      for (const auto& p : compare_paths) {
        reports.push_back(pgraph::MetricReport::load(p));
      }
      std::printf("%s", pgraph::compare(reports).c_str());
    } else if (*bench_sweep) {
      pgraph::RunConfig base = pgraph::RunConfig::load(sweep_config);
      pgraph::SweepOptions opts;
      opts.ks.clear();
      for (const auto& k : split_csv(sweep_ks)) opts.ks.push_back(std::stoi(k));
      opts.rankers.clear();
      for (const auto& r : split_csv(sweep_rankers)) {
        opts.rankers.push_back(pgraph::ranker_from_string(r));
      }
      opts.metric = sweep_metric;
      if (sweep_subsample > 0) opts.subsample = sweep_subsample;
      auto outcome = pgraph::sweep(base, opts);
      for (const auto& r : outcome.reports) {
        auto v = pgraph::metric_value(r, opts.metric);
        std::printf("%s k=%d: %s\n", r.ranker.c_str(), r.k,
                    v ? std::to_string(*v).c_str() : "-");
      }
      std::printf("best: ranker=%s k=%d (%s)\n",
                  outcome.best_report.ranker.c_str(), outcome.best_report.k,
                  sweep_metric.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
