// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: build database indexes, ask a single question,
// evaluate a dataset, or print difficulty statistics.
//
// Option precedence is flags > config file (--config) > environment >
// defaults. The API key is taken only from the environment, never from a
// flag or config file.

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "itsql/agent.hpp"
#include "itsql/column_index.hpp"
#include "itsql/embedding.hpp"
#include "itsql/eval.hpp"
#include "itsql/prompts.hpp"
#include "itsql/remote.hpp"
#include "itsql/schema_graph.hpp"
#include "itsql/value_index.hpp"

namespace fs = std::filesystem;
using namespace itsql;

namespace {

struct CommonOptions {
  std::string base_url = "https://api.openai.com";
  std::string api_key_env = "ITSQL_API_KEY";
  std::string chat_model = "gpt-4o";
  std::string embed_model;  // empty = offline n-gram embedder
  int max_turns = kDefaultMaxTurns;
  int search_k = kDefaultColumnSearchK;
  std::string run_dir;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--base-url", opts.base_url, "API base URL")
      ->envname("ITSQL_BASE_URL");
  cmd->add_option("--api-key-env", opts.api_key_env,
                  "environment variable holding the API key");
  cmd->add_option("--model", opts.chat_model, "chat model name")
      ->envname("ITSQL_MODEL");
  cmd->add_option("--embed-model", opts.embed_model,
                  "remote embedding model (default: offline n-gram embedder)")
      ->envname("ITSQL_EMBED_MODEL");
  cmd->add_option("--max-turns", opts.max_turns, "interaction turn limit");
  cmd->add_option("--search-k", opts.search_k, "results per tool search");
  cmd->add_option("--run-dir", opts.run_dir,
                  "directory for transcripts and the effective config");
}

RemoteConfig remote_config(const CommonOptions& opts) {
  RemoteConfig config;
  config.base_url = opts.base_url;
  config.api_key_env = opts.api_key_env;
  return config;
}

std::unique_ptr<EmbeddingProvider> make_embedder(const CommonOptions& opts) {
  if (opts.embed_model.empty())
    return std::make_unique<OfflineNgramEmbedder>();
  return std::make_unique<RemoteEmbedder>(remote_config(opts),
                                          opts.embed_model);
}

void write_effective_config(const CommonOptions& opts,
                            const std::string& command) {
  if (opts.run_dir.empty()) return;
  fs::create_directories(opts.run_dir);
  nlohmann::json j{{"command", command},
                   {"base_url", opts.base_url},
                   {"api_key_env", opts.api_key_env},
                   {"model", opts.chat_model},
                   {"embed_model", opts.embed_model},
                   {"max_turns", opts.max_turns},
                   {"search_k", opts.search_k}};
  std::ofstream out(fs::path(opts.run_dir) / "effective_config.json",
                    std::ios::binary);
  out << j.dump(2) << "\n";
}

/// Everything one database session needs, built from scratch or from cached
/// index files next to the database.
struct DbContext {
  DatabaseSchema schema;
  ColumnIndex column_index;
  ValueIndex value_index;
  SchemaGraph graph;
  std::string db_path;

  Toolset toolset(EmbeddingProvider& embedder, int search_k) {
    Toolset tools;
    tools.db_path = db_path;
    tools.schema = &schema;
    tools.column_index = &column_index;
    tools.value_index = &value_index;
    tools.graph = &graph;
    tools.embedder = &embedder;
    tools.search_k = search_k;
    return tools;
  }
};

DbContext load_db_context(const std::string& db_path, const std::string& db_id,
                          EmbeddingProvider& embedder,
                          const std::string& cache_dir) {
  DbContext ctx;
  ctx.db_path = db_path;
  ctx.schema = introspect(db_path, db_id);

  auto col_cache = cache_dir.empty()
                       ? ""
                       : (fs::path(cache_dir) / (db_id + ".columns.json"))
                             .string();
  auto val_cache = cache_dir.empty()
                       ? ""
                       : (fs::path(cache_dir) / (db_id + ".values.json"))
                             .string();
  bool cached = false;
  if (!col_cache.empty() && fs::exists(col_cache) && fs::exists(val_cache)) {
    try {
      ctx.column_index = load_column_index(col_cache);
      ctx.value_index = load_value_index(val_cache);
      cached = true;
    } catch (const Error&) {
      cached = false;  // stale or unreadable: rebuild below
    }
  }
  if (!cached) {
    std::vector<ColumnProfile> profiles;
    for (const auto& table : ctx.schema.tables)
      for (const auto& column : table.columns)
        profiles.push_back(profile_column(db_path, column));
    ctx.column_index = build_column_index(ctx.schema, profiles, embedder);
    ctx.value_index = build_value_index(db_path, ctx.schema);
    if (!col_cache.empty()) {
      fs::create_directories(cache_dir);
      save_column_index(ctx.column_index, col_cache);
      save_value_index(ctx.value_index, val_cache);
    }
  }
  ctx.graph = build_schema_graph(ctx.schema);
  return ctx;
}

std::vector<Demonstration> load_demonstrations(const std::string& dir) {
  auto demos = load_exemplar_dir(dir);
  if (demos.empty())
    throw Error("ConfigError", "no exemplar *.txt files under " + dir);
  return demos;
}

std::string find_database(const std::string& db_root, const std::string& db_id) {
  for (const char* layout : {"%s/%s/%s.sqlite", "%s/%s.sqlite"}) {
    char buf[4096];
    std::snprintf(buf, sizeof(buf), layout, db_root.c_str(), db_id.c_str(),
                  db_id.c_str());
    if (fs::exists(buf)) return buf;
  }
  throw Error("FileNotReadable",
              "no database file for '" + db_id + "' under " + db_root);
}

// -- index ------------------------------------------------------------------

int cmd_index(const std::string& db_root, const std::string& cache_dir,
              const CommonOptions& opts) {
  auto embedder = make_embedder(opts);
  int built = 0;
  for (const auto& entry : fs::directory_iterator(db_root)) {
    if (!entry.is_directory()) continue;
    auto db_id = entry.path().filename().string();
    auto db_path = entry.path() / (db_id + ".sqlite");
    if (!fs::exists(db_path)) continue;
    load_db_context(db_path.string(), db_id, *embedder, cache_dir);
    std::printf("indexed %s\n", db_id.c_str());
    ++built;
  }
  if (built == 0) {
    std::fprintf(stderr, "no <db_id>/<db_id>.sqlite databases under %s\n",
                 db_root.c_str());
    return 1;
  }
  std::printf("built indexes for %d database(s) in %s\n", built,
              cache_dir.c_str());
  return 0;
}

// -- ask --------------------------------------------------------------------

int cmd_ask(const std::string& db_path, const std::string& question,
            const std::string& evidence, const std::string& exemplar_dir,
            const std::string& replay_path, const std::string& cache_dir,
            const CommonOptions& opts) {
  auto embedder = make_embedder(opts);
  auto db_id = fs::path(db_path).stem().string();
  auto ctx = load_db_context(db_path, db_id, *embedder, cache_dir);
  auto tools = ctx.toolset(*embedder, opts.search_k);

  auto demos = load_demonstrations(exemplar_dir);
  auto prompt = build_prompt(
      kDefaultInstruction, demos, ctx.schema, question,
      evidence.empty() ? std::nullopt : std::optional<std::string>(evidence));

  std::unique_ptr<LlmBackend> backend;
  if (!replay_path.empty()) {
    backend = std::make_unique<ScriptedBackend>(load_replay_script(replay_path));
  } else {
    detail::require_api_key(opts.api_key_env);  // fail before any turn runs
    backend = std::make_unique<RemoteChatBackend>(remote_config(opts));
  }

  DecodingConfig decoding;
  decoding.model = opts.chat_model;
  auto transcript =
      run_session(*backend, tools, prompt, decoding, opts.max_turns);

  for (const auto& turn : transcript.turns) {
    if (!turn.thought.empty()) std::printf("Thought: %s\n", turn.thought.c_str());
    std::printf("Action: %s\n", turn.action_text.c_str());
    if (!turn.observation.empty())
      std::printf("Observation: %s\n", turn.observation.c_str());
  }
  std::printf("finish: %s\n", to_string(transcript.finish).c_str());
  if (!transcript.final_sql.has_value()) {
    std::fprintf(stderr, "no SQL produced\n");
    return 1;
  }
  std::printf("SQL: %s\n", transcript.final_sql->c_str());

  if (!opts.run_dir.empty()) {
    fs::create_directories(opts.run_dir);
    save_transcript(transcript,
                    (fs::path(opts.run_dir) / "transcript.json").string());
  }
  return transcript.finish == FinishReason::BackendError ? 1 : 0;
}

// -- eval -------------------------------------------------------------------

int cmd_eval(const std::string& dataset_path, const std::string& format_name,
             const std::string& db_root, const std::string& exemplar_dir,
             const std::string& replay_dir, const std::string& cache_dir,
             bool oracle_knowledge, int workers, const CommonOptions& opts) {
  auto format = parse_dataset_format(format_name);
  auto items = load_dataset(dataset_path, format);
  if (items.empty()) {
    std::fprintf(stderr, "dataset is empty\n");
    return 1;
  }
  if (replay_dir.empty()) detail::require_api_key(opts.api_key_env);

  auto demos = load_demonstrations(exemplar_dir);
  EvalReport report;
  report.rows.resize(items.size());
  std::vector<SessionTranscript> transcripts(items.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;

  auto worker = [&]() {
    auto embedder = make_embedder(opts);
    std::map<std::string, DbContext> contexts;
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= items.size()) return;
      const auto& item = items[i];
      EvalRow row;
      row.index = i;
      row.db_id = item.db_id;
      try {
        auto it = contexts.find(item.db_id);
        if (it == contexts.end()) {
          auto db_path = find_database(db_root, item.db_id);
          it = contexts
                   .emplace(item.db_id, load_db_context(db_path, item.db_id,
                                                        *embedder, cache_dir))
                   .first;
        }
        auto& ctx = it->second;
        auto tools = ctx.toolset(*embedder, opts.search_k);
        auto prompt = build_prompt(
            kDefaultInstruction, demos, ctx.schema, item.question,
            oracle_knowledge ? item.evidence : std::nullopt);

        std::unique_ptr<LlmBackend> backend;
        if (!replay_dir.empty()) {
          auto path = fs::path(replay_dir) / (std::to_string(i) + ".json");
          backend =
              std::make_unique<ScriptedBackend>(load_replay_script(path.string()));
        } else {
          backend = std::make_unique<RemoteChatBackend>(remote_config(opts));
        }
        DecodingConfig decoding;
        decoding.model = opts.chat_model;
        auto transcript =
            run_session(*backend, tools, prompt, decoding, opts.max_turns);
        row.rounds = transcript.turns.size();
        row.tokens = transcript.total_tokens();
        if (transcript.final_sql.has_value()) {
          row.predicted_sql = *transcript.final_sql;
          auto match =
              execution_accuracy(row.predicted_sql, item.gold_sql, ctx.db_path);
          row.ex = match.ex;
          row.detail = match.detail;
        } else {
          row.detail = "no SQL produced (" + to_string(transcript.finish) + ")";
        }
        transcripts[i] = std::move(transcript);
      } catch (const std::exception& e) {
        row.detail = e.what();
      }
      {
        std::lock_guard<std::mutex> lock(log_mutex);
        std::printf("[%zu/%zu] %s %s\n", i + 1, items.size(),
                    row.ex ? "EX" : "--", item.db_id.c_str());
      }
      report.rows[i] = std::move(row);
    }
  };

  std::vector<std::thread> pool;
  int n_workers = std::max(1, workers);
  for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  report.finalize();
  std::printf("%s", render_report_summary(report).c_str());

  if (!opts.run_dir.empty()) {
    fs::create_directories(opts.run_dir);
    write_report_csv(report, (fs::path(opts.run_dir) / "report.csv").string());
    auto tdir = fs::path(opts.run_dir) / "transcripts";
    fs::create_directories(tdir);
    for (std::size_t i = 0; i < transcripts.size(); ++i)
      if (!transcripts[i].turns.empty())
        save_transcript(transcripts[i],
                        (tdir / (std::to_string(i) + ".json")).string());
  }
  return 0;
}

// -- stats ------------------------------------------------------------------

int cmd_stats(const std::string& dataset_path, const std::string& format_name,
              const std::string& db_root) {
  auto format = parse_dataset_format(format_name);
  auto items = load_dataset(dataset_path, format);
  std::printf("items: %zu\n", items.size());
  std::printf("CVR: %.2f%%\n", compute_cvr(items));
  std::printf("CVCR (all literals): %.2f%%\n", compute_cvcr(items, true));
  std::printf("CVCR (any literal): %.2f%%\n", compute_cvcr(items, false));

  auto dist = join_distribution(items);
  for (const auto& [bucket, count] : dist.buckets)
    std::printf("tables=%s: %zu\n", bucket.c_str(), count);
  if (dist.residual > 0) std::printf("unparsed: %zu\n", dist.residual);
  std::printf("avg tables per query: %.2f\n", dist.average);

  if (!db_root.empty()) {
    std::set<std::string> db_ids;
    for (const auto& item : items) db_ids.insert(item.db_id);
    std::vector<DatabaseSchema> schemas;
    for (const auto& db_id : db_ids)
      schemas.push_back(introspect(find_database(db_root, db_id), db_id));
    auto stats = schema_stats(schemas);
    std::printf("tb/db: %.2f\ncol/tb: %.2f\nfk/db: %.2f\nstk/db: %.1f\n",
                stats.tb_per_db, stats.col_per_tb, stats.fk_per_db,
                stats.stk_per_db);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"interactive text-to-SQL agent over SQLite databases"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from a TOML/INI file");

  CommonOptions opts;

  // index
  std::string db_root;
  std::string cache_dir = "index_cache";
  auto* index_cmd =
      app.add_subcommand("index", "build and persist per-database indexes");
  index_cmd->add_option("--db-root", db_root, "directory of <db_id>/<db_id>.sqlite")
      ->required();
  index_cmd->add_option("--cache", cache_dir, "index cache directory");
  add_common(index_cmd, opts);

  // ask
  std::string db_path;
  std::string question;
  std::string evidence;
  std::string exemplar_dir = "data/exemplars/spider";
  std::string replay_path;
  auto* ask_cmd = app.add_subcommand("ask", "answer one question over a database");
  ask_cmd->add_option("--db", db_path, "SQLite database file")->required();
  ask_cmd->add_option("--question", question, "natural-language question")
      ->required();
  ask_cmd->add_option("--evidence", evidence, "external knowledge hint");
  ask_cmd->add_option("--exemplars", exemplar_dir, "demonstration directory");
  ask_cmd->add_option("--replay", replay_path,
                      "replay a saved transcript instead of calling the API");
  ask_cmd->add_option("--cache", cache_dir, "index cache directory");
  add_common(ask_cmd, opts);

  // eval
  std::string dataset_path;
  std::string format_name = "spider";
  std::string replay_dir;
  bool oracle_knowledge = false;
  int workers = 1;
  auto* eval_cmd = app.add_subcommand("eval", "run and score a dataset");
  eval_cmd->add_option("--dataset", dataset_path, "dataset JSON file")
      ->required();
  eval_cmd->add_option("--format", format_name, "spider or bird");
  eval_cmd->add_option("--db-root", db_root, "directory of database folders")
      ->required();
  eval_cmd->add_option("--exemplars", exemplar_dir, "demonstration directory");
  eval_cmd->add_option("--replay", replay_dir,
                       "directory of <index>.json transcripts to replay");
  eval_cmd->add_option("--cache", cache_dir, "index cache directory");
  eval_cmd->add_flag("--oracle-knowledge", oracle_knowledge,
                     "include dataset evidence in the prompt");
  eval_cmd->add_option("--workers", workers, "parallel sessions");
  add_common(eval_cmd, opts);

  // stats
  std::string stats_db_root;
  auto* stats_cmd =
      app.add_subcommand("stats", "print dataset difficulty statistics");
  stats_cmd->add_option("--dataset", dataset_path, "dataset JSON file")
      ->required();
  stats_cmd->add_option("--format", format_name, "spider or bird");
  stats_cmd->add_option("--db-root", stats_db_root,
                        "database folders (enables schema statistics)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  try {
    if (index_cmd->parsed()) {
      write_effective_config(opts, "index");
      return cmd_index(db_root, cache_dir, opts);
    }
    if (ask_cmd->parsed()) {
      write_effective_config(opts, "ask");
      return cmd_ask(db_path, question, evidence, exemplar_dir, replay_path,
                     cache_dir, opts);
    }
    if (eval_cmd->parsed()) {
      write_effective_config(opts, "eval");
      return cmd_eval(dataset_path, format_name, db_root, exemplar_dir,
                      replay_dir, cache_dir, oracle_knowledge, workers, opts);
    }
    if (stats_cmd->parsed())
      return cmd_stats(dataset_path, format_name, stats_db_root);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
