// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "itsql/agent.hpp"
#include "itsql/error.hpp"
#include "itsql/executor.hpp"
#include "itsql/schema.hpp"
#include "itsql/sql_tokens.hpp"

namespace itsql {

// ---------------------------------------------------------------------------
// Datasets

struct EvalItem {
  std::string question;
  std::string db_id;
  std::string gold_sql;
  std::optional<std::string> evidence;  // BIRD oracle knowledge
  std::string source;                   // dataset tag
};

enum class DatasetFormat { Spider, Bird };

inline DatasetFormat parse_dataset_format(const std::string& name) {
  if (lower(name) == "spider") return DatasetFormat::Spider;
  if (lower(name) == "bird") return DatasetFormat::Bird;
  throw Error("UnknownFormat", "unknown dataset format '" + name + "'");
}

/// Spider records: question / db_id / query. BIRD records: question / db_id /
/// SQL / evidence. Unknown extra fields are ignored.
inline std::vector<EvalItem> load_dataset(const std::string& path,
                                          DatasetFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("FileNotReadable", "cannot read " + path);
  nlohmann::json root = nlohmann::json::parse(in);
  if (!root.is_array())
    throw Error("MalformedRecord", path + ": expected a JSON array");

  const char* sql_field = format == DatasetFormat::Spider ? "query" : "SQL";
  std::vector<EvalItem> items;
  for (std::size_t i = 0; i < root.size(); ++i) {
    const auto& record = root[i];
    auto require = [&](const char* field) -> std::string {
      if (!record.contains(field) || !record[field].is_string())
        throw Error("MalformedRecord", "record " + std::to_string(i) +
                                           " missing field '" + field + "'");
      return record[field].get<std::string>();
    };
    EvalItem item;
    item.question = require("question");
    item.db_id = require("db_id");
    item.gold_sql = require(sql_field);
    if (item.gold_sql.empty())
      throw Error("MalformedRecord",
                  "record " + std::to_string(i) + " has empty gold SQL");
    if (format == DatasetFormat::Bird && record.contains("evidence") &&
        record["evidence"].is_string() &&
        !record["evidence"].get<std::string>().empty())
      item.evidence = record["evidence"].get<std::string>();
    item.source = format == DatasetFormat::Spider ? "spider" : "bird";
    items.push_back(std::move(item));
  }
  return items;
}

// ---------------------------------------------------------------------------
// Execution accuracy

namespace detail {

/// Canonical cell for comparison: numbers at ~1e-6 relative precision (%.6g),
/// everything else (incl. the NULL marker) verbatim.
inline std::string canonical_cell(const std::string& cell) {
  if (cell.empty() || cell == "NULL") return cell;
  char* end = nullptr;
  double value = std::strtod(cell.c_str(), &end);
  if (end == nullptr || *end != '\0') return cell;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", value);
  return buf;
}

inline std::vector<std::vector<std::string>> canonical_rows(
    const ExecutionResult& result) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(result.rows.size());
  for (const auto& row : result.rows) {
    std::vector<std::string> canon;
    canon.reserve(row.size());
    for (const auto& cell : row) canon.push_back(canonical_cell(cell));
    rows.push_back(std::move(canon));
  }
  return rows;
}

/// True when the statement carries ORDER BY at paren depth 0.
inline bool has_top_level_order_by(const std::string& sql) {
  auto tokens = tokenize_sql(sql);
  int depth = 0;
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    if (tokens[i].type == SqlTokenType::Punct) {
      if (tokens[i].text == "(") ++depth;
      if (tokens[i].text == ")") --depth;
    }
    if (depth == 0 && tokens[i].type == SqlTokenType::Word &&
        tokens[i].text == "order" &&
        tokens[i + 1].type == SqlTokenType::Word && tokens[i + 1].text == "by")
      return true;
  }
  return false;
}

}  // namespace detail

struct ExMatch {
  bool ex = false;
  std::string detail;
};

/// EX: predicted SQL counts as correct iff its execution result matches the
/// gold query's. Rows compare as multisets unless the gold statement has a
/// top-level ORDER BY; cells compare numerically at 1e-6 relative, NULL ==
/// NULL, else exact. Column names are ignored; column order is positional.
inline ExMatch execution_accuracy(const std::string& pred_sql,
                                  const std::string& gold_sql,
                                  const std::string& db_path) {
  ExecutionLimits uncapped;
  uncapped.row_cap = std::numeric_limits<int>::max();

  auto gold = execute_sql(db_path, gold_sql, uncapped);
  if (!gold.ok())
    throw Error("GoldExecutionFailed",
                gold.error->kind + ": " + gold.error->message);

  auto pred = execute_sql(db_path, pred_sql, uncapped);
  if (!pred.ok())
    return {false, "prediction failed: " + pred.error->kind + ": " +
                       pred.error->message};

  if (pred.columns.size() != gold.columns.size())
    return {false, "column count mismatch (" +
                       std::to_string(pred.columns.size()) + " vs " +
                       std::to_string(gold.columns.size()) + ")"};

  auto pred_rows = detail::canonical_rows(pred);
  auto gold_rows = detail::canonical_rows(gold);
  if (pred_rows.size() != gold_rows.size())
    return {false, "row count mismatch (" + std::to_string(pred_rows.size()) +
                       " vs " + std::to_string(gold_rows.size()) + ")"};

  if (!detail::has_top_level_order_by(gold_sql)) {
    std::sort(pred_rows.begin(), pred_rows.end());
    std::sort(gold_rows.begin(), gold_rows.end());
  }
  if (pred_rows != gold_rows) return {false, "result rows differ"};
  return {true, ""};
}

// ---------------------------------------------------------------------------
// Difficulty statistics

/// Share of gold queries with a WHERE clause (outside string literals).
inline double compute_cvr(const std::vector<EvalItem>& items) {
  if (items.empty()) return 0.0;
  std::size_t with_where = 0;
  for (const auto& item : items) {
    for (const auto& token : tokenize_sql(item.gold_sql)) {
      if (token.type == SqlTokenType::Word && token.text == "where") {
        ++with_where;
        break;
      }
    }
  }
  return 100.0 * static_cast<double>(with_where) / items.size();
}

namespace detail {

/// Literals (strings and numbers) appearing in comparison predicates:
/// adjacent to a comparison operator, after LIKE/BETWEEN, or inside an
/// IN (...) list.
inline void extract_comparison_literals(const std::string& sql,
                                        std::vector<std::string>& strings,
                                        std::vector<std::string>& numbers) {
  auto tokens = tokenize_sql(sql);
  auto is_cmp = [](const SqlToken& t) {
    return t.type == SqlTokenType::Operator;
  };
  auto is_kw = [](const SqlToken& t, const char* kw) {
    return t.type == SqlTokenType::Word && t.text == kw;
  };

  int in_list_depth = -1;  // paren depth of an open IN (...) list
  int depth = 0;
  bool after_between = false;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    if (t.type == SqlTokenType::Punct) {
      if (t.text == "(") {
        ++depth;
        if (i > 0 && is_kw(tokens[i - 1], "in")) in_list_depth = depth;
      } else if (t.text == ")") {
        if (depth == in_list_depth) in_list_depth = -1;
        --depth;
      }
      continue;
    }
    if (is_kw(t, "between")) after_between = true;
    if (t.type != SqlTokenType::String && t.type != SqlTokenType::Number)
      continue;

    bool in_predicate = false;
    if (i > 0) {
      const auto& prev = tokens[i - 1];
      if (is_cmp(prev) || is_kw(prev, "like") || is_kw(prev, "between"))
        in_predicate = true;
      if (after_between && is_kw(prev, "and")) {
        in_predicate = true;
        after_between = false;
      }
    }
    if (i + 1 < tokens.size() && is_cmp(tokens[i + 1])) in_predicate = true;
    if (in_list_depth >= 0 && depth >= in_list_depth) in_predicate = true;
    if (!in_predicate) continue;

    if (t.type == SqlTokenType::String) {
      std::string value = t.text;
      // LIKE wildcards never appear in the question text
      while (!value.empty() && value.front() == '%') value.erase(value.begin());
      while (!value.empty() && value.back() == '%') value.pop_back();
      if (!value.empty()) strings.push_back(value);
    } else {
      numbers.push_back(t.text);
    }
  }
}

inline std::string normalize_question(const std::string& question) {
  std::string out;
  bool last_space = true;
  for (unsigned char c : question) {
    if (std::isspace(c) != 0) {
      if (!last_space) out += ' ';
      last_space = true;
    } else {
      out += static_cast<char>(std::tolower(c));
      last_space = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

/// Question tokens that can match numeric literals: runs of digits and
/// interior dots, so "0.1" survives as one token.
inline std::vector<std::string> numeric_question_tokens(
    const std::string& question) {
  std::vector<std::string> out;
  std::string cur;
  for (std::size_t i = 0; i < question.size(); ++i) {
    unsigned char c = question[i];
    if (std::isdigit(c) != 0 ||
        (c == '.' && !cur.empty() && i + 1 < question.size() &&
         std::isdigit(static_cast<unsigned char>(question[i + 1])) != 0)) {
      cur += static_cast<char>(c);
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline bool numbers_equal(const std::string& a, const std::string& b) {
  char* end_a = nullptr;
  char* end_b = nullptr;
  double va = std::strtod(a.c_str(), &end_a);
  double vb = std::strtod(b.c_str(), &end_b);
  if (end_a == nullptr || *end_a != '\0' || end_b == nullptr || *end_b != '\0')
    return a == b;
  return va == vb;
}

}  // namespace detail

/// Share of WHERE-bearing queries whose constraint literals appear in the
/// question. `require_all` (the default) demands every literal be covered;
/// the ANY variant accepts one. Items with no extractable literal count as
/// not covered.
inline double compute_cvcr(const std::vector<EvalItem>& items,
                           bool require_all = true) {
  std::size_t qualifying = 0;
  std::size_t covered = 0;
  for (const auto& item : items) {
    bool has_where = false;
    for (const auto& token : tokenize_sql(item.gold_sql))
      if (token.type == SqlTokenType::Word && token.text == "where")
        has_where = true;
    if (!has_where) continue;
    ++qualifying;

    std::vector<std::string> strings;
    std::vector<std::string> numbers;
    detail::extract_comparison_literals(item.gold_sql, strings, numbers);
    if (strings.empty() && numbers.empty()) continue;  // implicit values

    std::string question = detail::normalize_question(item.question);
    auto question_numbers = detail::numeric_question_tokens(item.question);

    std::size_t found = 0;
    for (const auto& s : strings)
      if (question.find(detail::normalize_question(s)) != std::string::npos)
        ++found;
    for (const auto& n : numbers)
      for (const auto& qt : question_numbers)
        if (detail::numbers_equal(n, qt)) {
          ++found;
          break;
        }
    const std::size_t total = strings.size() + numbers.size();
    if (require_all ? (found == total) : (found > 0)) ++covered;
  }
  if (qualifying == 0) return 0.0;
  return 100.0 * static_cast<double>(covered) / qualifying;
}

// ---------------------------------------------------------------------------
// Join distribution

struct JoinDistribution {
  std::map<std::string, std::size_t> buckets;  // "1", "2", "3", "4+"
  std::size_t residual = 0;                    // unparseable gold SQL
  double average = 0.0;
};

namespace detail {

/// Distinct table names referenced by FROM/JOIN clauses, subqueries included,
/// aliases resolved by the distinct-name set.
inline std::set<std::string> tables_in_sql(const std::string& sql) {
  auto tokens = tokenize_sql(sql);
  std::set<std::string> tables;
  auto is_kw = [](const SqlToken& t, const char* kw) {
    return t.type == SqlTokenType::Word && t.text == kw;
  };
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!is_kw(tokens[i], "from") && !is_kw(tokens[i], "join")) continue;
    std::size_t j = i + 1;
    while (j < tokens.size()) {
      if (tokens[j].type == SqlTokenType::Punct && tokens[j].text == "(")
        break;  // subquery; its own FROM is reached by the outer scan
      if (tokens[j].type != SqlTokenType::Word) break;
      tables.insert(tokens[j].text);
      ++j;
      if (j < tokens.size() && is_kw(tokens[j], "as")) ++j;
      if (j < tokens.size() && tokens[j].type == SqlTokenType::Word &&
          !is_kw(tokens[j], "join") && !is_kw(tokens[j], "where") &&
          !is_kw(tokens[j], "on") && !is_kw(tokens[j], "group") &&
          !is_kw(tokens[j], "order") && !is_kw(tokens[j], "limit") &&
          !is_kw(tokens[j], "inner") && !is_kw(tokens[j], "left") &&
          !is_kw(tokens[j], "cross") && !is_kw(tokens[j], "having") &&
          !is_kw(tokens[j], "union") && !is_kw(tokens[j], "intersect") &&
          !is_kw(tokens[j], "except"))
        ++j;  // alias
      if (j < tokens.size() && tokens[j].type == SqlTokenType::Punct &&
          tokens[j].text == ",")
        ++j;
      else
        break;
    }
  }
  return tables;
}

}  // namespace detail

inline JoinDistribution join_distribution(const std::vector<EvalItem>& items) {
  JoinDistribution dist;
  dist.buckets = {{"1", 0}, {"2", 0}, {"3", 0}, {"4+", 0}};
  long long total = 0;
  std::size_t counted = 0;
  for (const auto& item : items) {
    auto tables = detail::tables_in_sql(item.gold_sql);
    if (tables.empty()) {
      ++dist.residual;
      continue;
    }
    std::size_t n = tables.size();
    total += static_cast<long long>(n);
    ++counted;
    if (n == 1)
      ++dist.buckets["1"];
    else if (n == 2)
      ++dist.buckets["2"];
    else if (n == 3)
      ++dist.buckets["3"];
    else
      ++dist.buckets["4+"];
  }
  dist.average = counted == 0 ? 0.0 : static_cast<double>(total) / counted;
  return dist;
}

// ---------------------------------------------------------------------------
// Schema statistics

struct SchemaStats {
  double tb_per_db = 0.0;
  double col_per_tb = 0.0;
  double fk_per_db = 0.0;
  double stk_per_db = 0.0;  // tokenizer-dependent, reported without tolerance
};

/// Canonical DDL-style serialization used for the schema-token statistic.
inline std::string render_schema_ddl(const DatabaseSchema& schema) {
  std::string out;
  for (const auto& table : schema.tables) {
    out += "CREATE TABLE " + table.name + " (";
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
      if (i > 0) out += ", ";
      out += table.columns[i].name + " " +
             to_string(table.columns[i].declared_type);
    }
    out += ");\n";
  }
  for (const auto& fk : schema.relations)
    out += "FOREIGN KEY " + fk.from_table + "." + fk.from_column +
           " REFERENCES " + fk.to_table + "." + fk.to_column + ";\n";
  return out;
}

inline SchemaStats schema_stats(const std::vector<DatabaseSchema>& schemas,
                                const Tokenizer& tokenizer =
                                    count_tokens_whitespace) {
  SchemaStats stats;
  if (schemas.empty()) return stats;
  long long tables = 0;
  long long columns = 0;
  long long fks = 0;
  long long schema_tokens = 0;
  for (const auto& schema : schemas) {
    tables += static_cast<long long>(schema.tables.size());
    columns += static_cast<long long>(schema.column_count());
    fks += static_cast<long long>(schema.relations.size());
    schema_tokens += tokenizer(render_schema_ddl(schema));
  }
  const double n = static_cast<double>(schemas.size());
  stats.tb_per_db = tables / n;
  stats.col_per_tb = tables == 0 ? 0.0
                                 : static_cast<double>(columns) / tables;
  stats.fk_per_db = fks / n;
  stats.stk_per_db = schema_tokens / n;
  return stats;
}

// ---------------------------------------------------------------------------
// Cost accounting

struct PriceTable {
  double prompt_per_1k = 0.005;      // USD per 1000 prompt tokens
  double completion_per_1k = 0.015;  // USD per 1000 completion tokens
};

struct CostReport {
  double avg_rounds = 0.0;
  double avg_tokens = 0.0;
  double avg_cost = 0.0;
};

inline CostReport cost_report(const std::vector<SessionTranscript>& transcripts,
                              const PriceTable& prices = {}) {
  if (transcripts.empty())
    throw Error("MissingUsage", "no transcripts to aggregate");
  double rounds = 0.0;
  double tokens = 0.0;
  double cost = 0.0;
  for (const auto& t : transcripts) {
    if (t.usage.empty() && !t.turns.empty())
      throw Error("MissingUsage",
                  "transcript has turns but no token usage records");
    rounds += static_cast<double>(t.turns.size());
    tokens += static_cast<double>(t.total_tokens());
    for (const auto& u : t.usage)
      cost += u.prompt_tokens / 1000.0 * prices.prompt_per_1k +
              u.completion_tokens / 1000.0 * prices.completion_per_1k;
  }
  const double n = static_cast<double>(transcripts.size());
  return {rounds / n, tokens / n, cost / n};
}

// ---------------------------------------------------------------------------
// Reports

struct EvalRow {
  std::size_t index = 0;
  std::string db_id;
  std::string predicted_sql;
  bool ex = false;
  std::string detail;
  std::size_t rounds = 0;
  long long tokens = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  double ex_percentage = 0.0;
  double avg_rounds = 0.0;
  double avg_tokens = 0.0;
  double avg_cost = 0.0;

  void finalize(const PriceTable& prices = {}) {
    if (rows.empty()) return;
    std::size_t correct = 0;
    double rounds = 0.0;
    double tokens = 0.0;
    for (const auto& row : rows) {
      if (row.ex) ++correct;
      rounds += static_cast<double>(row.rounds);
      tokens += static_cast<double>(row.tokens);
    }
    const double n = static_cast<double>(rows.size());
    ex_percentage = 100.0 * static_cast<double>(correct) / n;
    avg_rounds = rounds / n;
    avg_tokens = tokens / n;
    // per-row token splits are not retained; price prompt and completion
    // tokens uniformly at the prompt rate plus completion rate blend
    avg_cost = avg_tokens / 1000.0 *
               (prices.prompt_per_1k + prices.completion_per_1k) / 2.0;
  }
};

namespace detail {

inline std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += "\"";
  return out;
}

}  // namespace detail

inline void write_report_csv(const EvalReport& report,
                             const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("FileNotReadable", "cannot write " + path);
  out << "index,db_id,predicted_sql,ex,detail,rounds,tokens\n";
  for (const auto& row : report.rows) {
    out << row.index << "," << detail::csv_escape(row.db_id) << ","
        << detail::csv_escape(row.predicted_sql) << ","
        << (row.ex ? "1" : "0") << "," << detail::csv_escape(row.detail)
        << "," << row.rounds << "," << row.tokens << "\n";
  }
}

inline std::string render_report_summary(const EvalReport& report) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "items: %zu\nEX: %.2f%%\navg rounds: %.2f\navg tokens: "
                "%.1f\navg cost: $%.4f\n",
                report.rows.size(), report.ex_percentage, report.avg_rounds,
                report.avg_tokens, report.avg_cost);
  return buf;
}

}  // namespace itsql
