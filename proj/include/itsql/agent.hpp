// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "itsql/column_index.hpp"
#include "itsql/error.hpp"
#include "itsql/executor.hpp"
#include "itsql/schema.hpp"
#include "itsql/schema_graph.hpp"
#include "itsql/value_index.hpp"

namespace itsql {

// ---------------------------------------------------------------------------
// Decoding configuration (inference defaults)

struct DecodingConfig {
  std::string model = "gpt-4o";
  double temperature = 0.7;
  double top_p = 0.95;
  int n = 3;
  std::vector<std::string> stop = {"\nObservation", "\nThought", "[END]"};
  int max_tokens = 384;
};

inline constexpr int kDefaultMaxTurns = 15;

// ---------------------------------------------------------------------------
// Prompt

struct Demonstration {
  std::string schema_text;
  std::vector<std::string> exemplars;  // full worked transcripts, as text
};

struct PromptBundle {
  std::string instruction;
  std::vector<Demonstration> demonstrations;
  std::string target_schema_summary;
  std::string question;
  std::optional<std::string> evidence;
};

/// One-line schema summary: table names plus the FK count. Column detail is
/// retrieved on demand through the tools, never inlined here.
inline std::string render_schema_summary(const DatabaseSchema& schema) {
  std::string out = "Tables: ";
  for (std::size_t i = 0; i < schema.tables.size(); ++i) {
    if (i > 0) out += ", ";
    out += schema.tables[i].name;
  }
  if (schema.tables.empty()) out += "(none)";
  out += " (" + std::to_string(schema.relations.size()) + " foreign keys)";
  return out;
}

inline PromptBundle build_prompt(const std::string& instruction,
                                 std::vector<Demonstration> demonstrations,
                                 const DatabaseSchema& schema,
                                 const std::string& question,
                                 std::optional<std::string> evidence = {}) {
  if (demonstrations.empty())
    throw Error("ConfigError", "at least one demonstration is required");
  PromptBundle bundle;
  bundle.instruction = instruction;
  bundle.demonstrations = std::move(demonstrations);
  bundle.target_schema_summary = render_schema_summary(schema);
  bundle.question = question;
  bundle.evidence = std::move(evidence);
  return bundle;
}

/// Serialization order is fixed: instruction, demonstrations, schema summary,
/// question (evidence directly after the question when present).
inline std::string serialize_prompt(const PromptBundle& bundle) {
  std::string out = bundle.instruction + "\n\n";
  for (const auto& demo : bundle.demonstrations) {
    out += demo.schema_text + "\n";
    for (const auto& exemplar : demo.exemplars) out += exemplar + "\n";
    out += "\n";
  }
  out += "Schema: " + bundle.target_schema_summary + "\n";
  out += "Question: " + bundle.question + "\n";
  if (bundle.evidence.has_value()) out += "Evidence: " + *bundle.evidence + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Action grammar

enum class ActionKind { SearchColumn, SearchValue, FindShortestPath, ExecuteSQL, Done };

inline std::string to_string(ActionKind k) {
  switch (k) {
    case ActionKind::SearchColumn: return "SearchColumn";
    case ActionKind::SearchValue: return "SearchValue";
    case ActionKind::FindShortestPath: return "FindShortestPath";
    case ActionKind::ExecuteSQL: return "ExecuteSQL";
    case ActionKind::Done: return "Done";
  }
  return "?";
}

struct ToolAction {
  ActionKind kind = ActionKind::Done;
  std::vector<std::string> args;                // positional
  std::map<std::string, std::optional<std::string>> kwargs;  // key=None -> nullopt
};

struct ParsedTurn {
  std::string thought;
  std::string action_text;  // the raw argument list as emitted
  ToolAction action;
};

struct ParseFailure {
  std::string reason;  // one line; becomes the next observation
};

namespace detail {

/// Parses `Name(arg, key="v", key=None)`. Positional args are double-quoted
/// strings with backslash escapes.
inline bool parse_call(const std::string& text, std::string& name,
                       std::vector<std::string>& args,
                       std::map<std::string, std::optional<std::string>>& kwargs,
                       std::string& reason) {
  std::size_t i = 0;
  auto skip_ws = [&]() {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
  };
  skip_ws();
  std::size_t name_start = i;
  while (i < text.size() && (std::isalnum(static_cast<unsigned char>(text[i])) ||
                             text[i] == '_'))
    ++i;
  name = text.substr(name_start, i - name_start);
  if (name.empty()) {
    reason = "missing action name";
    return false;
  }
  skip_ws();
  if (i >= text.size() || text[i] != '(') {
    reason = "expected '(' after action name";
    return false;
  }
  ++i;

  auto parse_quoted = [&](std::string& out) -> bool {
    if (i >= text.size() || text[i] != '"') return false;
    ++i;
    out.clear();
    while (i < text.size() && text[i] != '"') {
      if (text[i] == '\\' && i + 1 < text.size()) ++i;
      out += text[i++];
    }
    if (i >= text.size()) return false;
    ++i;  // closing quote
    return true;
  };

  while (true) {
    skip_ws();
    if (i < text.size() && text[i] == ')') {
      ++i;
      return true;
    }
    if (i >= text.size()) {
      reason = "unterminated argument list";
      return false;
    }
    if (text[i] == '"') {
      std::string value;
      if (!parse_quoted(value)) {
        reason = "unterminated string argument";
        return false;
      }
      args.push_back(std::move(value));
    } else {
      std::size_t key_start = i;
      while (i < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[i])) ||
              text[i] == '_'))
        ++i;
      std::string key = text.substr(key_start, i - key_start);
      skip_ws();
      if (key.empty() || i >= text.size() || text[i] != '=') {
        reason = "expected a quoted string or key=value argument";
        return false;
      }
      ++i;
      skip_ws();
      if (text.compare(i, 4, "None") == 0) {
        i += 4;
        kwargs[key] = std::nullopt;
      } else {
        std::string value;
        if (!parse_quoted(value)) {
          reason = "keyword value must be a quoted string or None";
          return false;
        }
        kwargs[key] = value;
      }
    }
    skip_ws();
    if (i < text.size() && text[i] == ',') {
      ++i;
      continue;
    }
    if (i < text.size() && text[i] == ')') {
      ++i;
      return true;
    }
    reason = "expected ',' or ')' in argument list";
    return false;
  }
}

}  // namespace detail

/// Grammar: optional `Thought:` line(s), then exactly one `Action: Name(...)`
/// line. Unknown names, bad arity, and malformed syntax produce a
/// ParseFailure whose reason becomes the next observation.
inline std::variant<ParsedTurn, ParseFailure> parse_action(
    const std::string& model_output) {
  std::istringstream in(model_output);
  std::string line;
  std::string thought;
  std::string action_line;
  bool in_thought = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("Action:", 0) == 0) {
      action_line = detail::strip(line.substr(7));
      break;
    }
    if (line.rfind("Thought:", 0) == 0) {
      if (!thought.empty()) thought += "\n";
      thought += detail::strip(line.substr(8));
      in_thought = true;
    } else if (in_thought && !detail::strip(line).empty()) {
      thought += "\n" + detail::strip(line);
    }
  }
  if (action_line.empty())
    return ParseFailure{"no 'Action:' line found"};

  std::string name;
  std::vector<std::string> args;
  std::map<std::string, std::optional<std::string>> kwargs;
  std::string reason;
  if (!detail::parse_call(action_line, name, args, kwargs, reason))
    return ParseFailure{reason};

  ToolAction action;
  if (name == "SearchColumn")
    action.kind = ActionKind::SearchColumn;
  else if (name == "SearchValue")
    action.kind = ActionKind::SearchValue;
  else if (name == "FindShortestPath")
    action.kind = ActionKind::FindShortestPath;
  else if (name == "ExecuteSQL")
    action.kind = ActionKind::ExecuteSQL;
  else if (name == "Done")
    action.kind = ActionKind::Done;
  else
    return ParseFailure{"unknown action " + name};

  action.args = std::move(args);
  action.kwargs = std::move(kwargs);

  switch (action.kind) {
    case ActionKind::SearchColumn:
      if (action.args.size() != 1)
        return ParseFailure{"SearchColumn takes exactly one argument"};
      break;
    case ActionKind::SearchValue:
      if (action.args.empty() || action.args.size() > 3)
        return ParseFailure{"SearchValue takes value plus optional table/column"};
      break;
    case ActionKind::FindShortestPath:
      if (action.args.size() != 2)
        return ParseFailure{"FindShortestPath takes exactly two arguments"};
      break;
    case ActionKind::ExecuteSQL:
      if (action.args.size() != 1)
        return ParseFailure{"ExecuteSQL takes exactly one argument"};
      break;
    case ActionKind::Done:
      if (action.args.size() > 1)
        return ParseFailure{"Done takes at most one argument"};
      break;
  }

  ParsedTurn parsed;
  parsed.thought = thought;
  parsed.action_text = action_line;
  parsed.action = std::move(action);
  return parsed;
}

// ---------------------------------------------------------------------------
// Tool dispatch

struct Toolset {
  std::string db_path;
  const DatabaseSchema* schema = nullptr;
  const ColumnIndex* column_index = nullptr;
  const ValueIndex* value_index = nullptr;
  const SchemaGraph* graph = nullptr;
  EmbeddingProvider* embedder = nullptr;
  ExecutionLimits limits;
  int search_k = kDefaultColumnSearchK;
};

namespace detail {

inline std::string format_score(double score) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", score);
  return buf;
}

inline std::string cap_observation(std::string text, int char_cap) {
  const auto cap = static_cast<std::size_t>(char_cap);
  if (text.size() > cap) {
    text.resize(cap > 14 ? cap - 14 : 0);
    text += "...[truncated]";
  }
  return text;
}

}  // namespace detail

/// Executes one action against the bound tools and renders the observation.
/// Tool errors never abort the session; they become `Error: ...` text the
/// agent can react to.
inline std::string dispatch_action(const ToolAction& action, Toolset& tools) {
  try {
    switch (action.kind) {
      case ActionKind::SearchColumn: {
        auto hits = search_column(*tools.column_index, action.args.at(0),
                                  *tools.embedder, tools.search_k);
        if (hits.empty()) return "No columns found (empty index).";
        std::string out;
        for (const auto& h : hits) {
          if (!out.empty()) out += "\n";
          out += "column_name=" + h.column_name + ", table_name=" +
                 h.table_name + ", column_type=" + h.column_type;
          if (!h.column_desc.empty()) out += ", column_desc=" + h.column_desc;
          out += ", column_statistics=[" + h.column_statistics + "]" +
                 ", score=" + detail::format_score(h.score);
        }
        return detail::cap_observation(out, tools.limits.observation_char_cap);
      }
      case ActionKind::SearchValue: {
        std::optional<std::string> table;
        std::optional<std::string> column;
        if (action.args.size() > 1) table = action.args[1];
        if (action.args.size() > 2) column = action.args[2];
        auto it = action.kwargs.find("table");
        if (it != action.kwargs.end() && it->second.has_value())
          table = it->second;
        it = action.kwargs.find("column");
        if (it != action.kwargs.end() && it->second.has_value())
          column = it->second;
        auto hits = search_value(*tools.value_index, action.args.at(0), table,
                                 column, tools.search_k, tools.schema);
        if (hits.empty()) return "No matching cell values.";
        std::string out;
        for (const auto& h : hits) {
          if (!out.empty()) out += "\n";
          out += "(table=" + h.table + ", column=" + h.column + ", value='" +
                 h.value + "', score=" + detail::format_score(h.score) + ")";
        }
        return detail::cap_observation(out, tools.limits.observation_char_cap);
      }
      case ActionKind::FindShortestPath: {
        auto path = find_shortest_path(*tools.graph, action.args.at(0),
                                       action.args.at(1));
        std::string out = "Path: ";
        for (std::size_t i = 0; i < path.nodes.size(); ++i) {
          if (i > 0) out += " -> ";
          out += path.nodes[i];
        }
        out += "\nJoins (" + std::to_string(path.join_count) +
               "): " + path.rendered;
        return detail::cap_observation(out, tools.limits.observation_char_cap);
      }
      case ActionKind::ExecuteSQL: {
        auto result = execute_sql(tools.db_path, action.args.at(0), tools.limits);
        return render_observation(result, tools.limits);
      }
      case ActionKind::Done:
        return "";
    }
  } catch (const Error& e) {
    return "Error: " + std::string(e.what());
  } catch (const std::exception& e) {
    return std::string("Error: InternalError: ") + e.what();
  }
  return "";
}

// ---------------------------------------------------------------------------
// LLM backend

struct TokenUsage {
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
};

struct Completion {
  std::vector<std::string> candidates;
  TokenUsage usage;
};

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual Completion generate(const std::string& prompt,
                              const DecodingConfig& config) = 0;
};

/// Whitespace token counter; the fallback when no BPE tokenizer is plugged in.
inline long long count_tokens_whitespace(const std::string& text) {
  long long count = 0;
  bool in_token = false;
  for (unsigned char c : text) {
    bool ws = std::isspace(c) != 0;
    if (!ws && !in_token) ++count;
    in_token = !ws;
  }
  return count;
}

using Tokenizer = std::function<long long(const std::string&)>;

/// Replays a fixed sequence of model outputs; token usage accounted via the
/// pluggable tokenizer. Exhausting the script throws, which the session loop
/// reports as a backend error.
class ScriptedBackend : public LlmBackend {
 public:
  explicit ScriptedBackend(std::vector<std::string> outputs,
                           Tokenizer tokenizer = count_tokens_whitespace)
      : outputs_(std::move(outputs)), tokenizer_(std::move(tokenizer)) {}

  Completion generate(const std::string& prompt,
                      const DecodingConfig&) override {
    if (next_ >= outputs_.size())
      throw Error("BackendError", "scripted backend exhausted after " +
                                      std::to_string(next_) + " calls");
    Completion c;
    c.candidates.push_back(outputs_[next_++]);
    c.usage.prompt_tokens = tokenizer_(prompt);
    c.usage.completion_tokens = tokenizer_(c.candidates.front());
    return c;
  }

 private:
  std::vector<std::string> outputs_;
  Tokenizer tokenizer_;
  std::size_t next_ = 0;
};

// ---------------------------------------------------------------------------
// Session

struct Turn {
  std::string thought;
  std::string action_text;            // raw `Name(...)` text as emitted
  std::optional<ToolAction> action;   // absent when the output failed to parse
  std::string observation;            // empty only for Done
};

enum class FinishReason { Done, MaxTurns, BackendError };

inline std::string to_string(FinishReason r) {
  switch (r) {
    case FinishReason::Done: return "done";
    case FinishReason::MaxTurns: return "max_turns";
    case FinishReason::BackendError: return "backend_error";
  }
  return "?";
}

struct SessionTranscript {
  PromptBundle prompt;
  std::vector<Turn> turns;
  std::optional<std::string> final_sql;
  FinishReason finish = FinishReason::MaxTurns;
  std::vector<TokenUsage> usage;  // one entry per backend call

  long long total_tokens() const {
    long long total = 0;
    for (const auto& u : usage) total += u.prompt_tokens + u.completion_tokens;
    return total;
  }
};

/// Re-serializes prompt plus every prior thought/action/observation verbatim.
inline std::string serialize_history(const PromptBundle& prompt,
                                     const std::vector<Turn>& turns) {
  std::string out = serialize_prompt(prompt);
  for (const auto& turn : turns) {
    out += "Thought: " + turn.thought + "\n";
    out += "Action: " + turn.action_text + "\n";
    if (turn.action.has_value() && turn.action->kind == ActionKind::Done)
      continue;
    out += "Observation: " + turn.observation + "\n";
  }
  return out;
}

/// The interaction loop: request candidates, take the first that parses,
/// dispatch, append the turn; stop on Done or max_turns. The final SQL is
/// Done's argument when given, otherwise the most recent successfully
/// executed query.
inline SessionTranscript run_session(LlmBackend& llm, Toolset& tools,
                                     const PromptBundle& prompt,
                                     const DecodingConfig& config = {},
                                     int max_turns = kDefaultMaxTurns,
                                     int backend_retries = 3) {
  SessionTranscript transcript;
  transcript.prompt = prompt;
  std::optional<std::string> last_executed_sql;

  for (int turn_idx = 0; turn_idx < max_turns; ++turn_idx) {
    std::string context = serialize_history(prompt, transcript.turns);

    Completion completion;
    bool got_completion = false;
    for (int attempt = 0; attempt < backend_retries && !got_completion;
         ++attempt) {
      try {
        completion = llm.generate(context, config);
        got_completion = true;
      } catch (const std::exception&) {
        if (attempt + 1 == backend_retries) {
          transcript.finish = FinishReason::BackendError;
          transcript.final_sql = last_executed_sql;
          return transcript;
        }
      }
    }
    transcript.usage.push_back(completion.usage);

    // first candidate (sampling order) that parses wins
    std::optional<ParsedTurn> parsed;
    std::string first_reason;
    for (const auto& candidate : completion.candidates) {
      auto result = parse_action(candidate);
      if (auto* ok = std::get_if<ParsedTurn>(&result)) {
        parsed = std::move(*ok);
        break;
      }
      if (first_reason.empty())
        first_reason = std::get<ParseFailure>(result).reason;
    }

    Turn turn;
    if (!parsed.has_value()) {
      turn.action_text =
          completion.candidates.empty() ? "" : completion.candidates.front();
      turn.observation = "Error: ParseFailure: " + first_reason;
      transcript.turns.push_back(std::move(turn));
      continue;
    }

    turn.thought = parsed->thought;
    turn.action_text = parsed->action_text;
    turn.action = parsed->action;

    if (parsed->action.kind == ActionKind::Done) {
      transcript.turns.push_back(std::move(turn));
      transcript.finish = FinishReason::Done;
      transcript.final_sql = parsed->action.args.empty()
                                 ? last_executed_sql
                                 : std::optional<std::string>(
                                       parsed->action.args.front());
      return transcript;
    }

    turn.observation = dispatch_action(parsed->action, tools);
    if (parsed->action.kind == ActionKind::ExecuteSQL &&
        turn.observation.rfind("Error:", 0) != 0) {
      last_executed_sql = parsed->action.args.front();
    }
    transcript.turns.push_back(std::move(turn));
  }

  transcript.finish = FinishReason::MaxTurns;
  transcript.final_sql = last_executed_sql;
  return transcript;
}

// ---------------------------------------------------------------------------
// Transcript persistence (also the scripted-replay input format)

inline nlohmann::json transcript_to_json(const SessionTranscript& t) {
  nlohmann::json j;
  j["format"] = "itsql-transcript";
  j["version"] = 1;
  j["prompt"] = {{"instruction", t.prompt.instruction},
                 {"schema_summary", t.prompt.target_schema_summary},
                 {"question", t.prompt.question}};
  if (t.prompt.evidence.has_value())
    j["prompt"]["evidence"] = *t.prompt.evidence;
  j["prompt"]["demonstrations"] = nlohmann::json::array();
  for (const auto& d : t.prompt.demonstrations)
    j["prompt"]["demonstrations"].push_back(
        {{"schema_text", d.schema_text}, {"exemplars", d.exemplars}});
  j["turns"] = nlohmann::json::array();
  for (const auto& turn : t.turns)
    j["turns"].push_back({{"thought", turn.thought},
                          {"action", turn.action_text},
                          {"observation", turn.observation}});
  if (t.final_sql.has_value()) j["final_sql"] = *t.final_sql;
  j["finish"] = to_string(t.finish);
  j["usage"] = nlohmann::json::array();
  for (const auto& u : t.usage)
    j["usage"].push_back({{"prompt_tokens", u.prompt_tokens},
                          {"completion_tokens", u.completion_tokens}});
  return j;
}

inline void save_transcript(const SessionTranscript& t,
                            const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("FileNotReadable", "cannot write " + path);
  out << transcript_to_json(t).dump(2) << "\n";
}

/// Reconstructs the model-output script from a persisted transcript: one
/// `Thought: ...\nAction: ...` block per turn.
inline std::vector<std::string> replay_script_from_json(
    const nlohmann::json& j) {
  if (!j.contains("format") || j["format"] != "itsql-transcript")
    throw Error("UnknownFormat", "not a transcript file");
  std::vector<std::string> outputs;
  for (const auto& turn : j.at("turns")) {
    std::string block;
    std::string thought = turn.at("thought").get<std::string>();
    if (!thought.empty()) block += "Thought: " + thought + "\n";
    block += "Action: " + turn.at("action").get<std::string>();
    outputs.push_back(std::move(block));
  }
  return outputs;
}

inline std::vector<std::string> load_replay_script(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("FileNotReadable", "cannot read " + path);
  return replay_script_from_json(nlohmann::json::parse(in));
}

}  // namespace itsql
