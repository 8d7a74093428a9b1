// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "itsql/error.hpp"
#include "itsql/sqlite.hpp"

namespace itsql {

struct ExecutionLimits {
  int timeout_ms = 30000;
  int row_cap = 20;
  int observation_char_cap = 2000;
};

/// Counting past the row cap stops here; larger results report "≥ 10000".
inline constexpr long long kRowCountBudget = 10000;

struct ExecutionError {
  std::string kind;  // SyntaxError, SemanticError, Timeout, WriteAttempted
  std::string message;
};

struct ExecutionResult {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;  // NULL cells render as "NULL"
  long long total_row_count = 0;
  bool count_is_lower_bound = false;
  bool truncated = false;
  long long elapsed_ms = 0;
  std::optional<ExecutionError> error;

  bool ok() const { return !error.has_value(); }
};

namespace detail {

struct ExecGuard {
  std::chrono::steady_clock::time_point deadline;
  bool timed_out = false;
  bool write_attempted = false;
};

inline int deny_writes_authorizer(void* ctx, int action, const char*,
                                  const char*, const char*, const char*) {
  switch (action) {
    case SQLITE_SELECT:
    case SQLITE_READ:
    case SQLITE_FUNCTION:
    case SQLITE_RECURSIVE:
      return SQLITE_OK;
    default:
      static_cast<ExecGuard*>(ctx)->write_attempted = true;
      return SQLITE_DENY;
  }
}

inline int timeout_handler(void* ctx) {
  auto* guard = static_cast<ExecGuard*>(ctx);
  if (std::chrono::steady_clock::now() >= guard->deadline) {
    guard->timed_out = true;
    return 1;  // interrupt
  }
  return 0;
}

}  // namespace detail

/// Runs one statement on a fresh read-only connection. Writes are refused
/// both by the connection mode and an authorizer, so the database file is
/// byte-identical afterwards. Engine errors come back verbatim in the result,
/// never as exceptions: they are the agent's repair signal.
inline ExecutionResult execute_sql(const std::string& db_path,
                                   const std::string& sql,
                                   const ExecutionLimits& limits = {}) {
  ExecutionResult result;
  auto started = std::chrono::steady_clock::now();
  auto finish = [&]() -> ExecutionResult& {
    result.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - started)
                            .count();
    return result;
  };

  SqliteHandle db;
  try {
    db = open_readonly(db_path);
  } catch (const Error& e) {
    result.error = ExecutionError{e.kind(), e.what()};
    return finish();
  }

  detail::ExecGuard guard;
  guard.deadline = started + std::chrono::milliseconds(limits.timeout_ms);
  sqlite3_set_authorizer(db.get(), detail::deny_writes_authorizer, &guard);
  sqlite3_progress_handler(db.get(), 1000, detail::timeout_handler, &guard);

  sqlite3_stmt* raw = nullptr;
  int rc = sqlite3_prepare_v2(db.get(), sql.c_str(), -1, &raw, nullptr);
  StmtHandle stmt(raw);
  if (rc != SQLITE_OK) {
    std::string msg = sqlite3_errmsg(db.get());
    if (guard.write_attempted) {
      result.error = ExecutionError{"WriteAttempted",
                                    "statement is not read-only: " + msg};
    } else if (rc == SQLITE_ERROR) {
      result.error = ExecutionError{"SyntaxError", msg};
    } else {
      result.error = ExecutionError{"SemanticError", msg};
    }
    return finish();
  }
  if (stmt == nullptr) {
    // whitespace / comment-only input
    result.error = ExecutionError{"SyntaxError", "empty statement"};
    return finish();
  }

  int col_count = sqlite3_column_count(stmt.get());
  for (int i = 0; i < col_count; ++i) {
    const char* name = sqlite3_column_name(stmt.get(), i);
    result.columns.push_back(name != nullptr ? name : "");
  }

  while (true) {
    rc = sqlite3_step(stmt.get());
    if (rc == SQLITE_ROW) {
      if (result.total_row_count < limits.row_cap) {
        std::vector<std::string> row;
        row.reserve(static_cast<std::size_t>(col_count));
        for (int i = 0; i < col_count; ++i) {
          if (sqlite3_column_type(stmt.get(), i) == SQLITE_NULL)
            row.push_back("NULL");
          else
            row.push_back(column_text(stmt.get(), i));
        }
        result.rows.push_back(std::move(row));
      }
      ++result.total_row_count;
      if (result.total_row_count >=
          std::max<long long>(kRowCountBudget, limits.row_cap)) {
        result.count_is_lower_bound = true;
        break;
      }
    } else if (rc == SQLITE_DONE) {
      break;
    } else {
      std::string msg = sqlite3_errmsg(db.get());
      if (guard.timed_out)
        result.error = ExecutionError{
            "Timeout", "query exceeded " + std::to_string(limits.timeout_ms) +
                           " ms"};
      else if (guard.write_attempted || rc == SQLITE_READONLY ||
               rc == SQLITE_AUTH)
        result.error =
            ExecutionError{"WriteAttempted", "statement is not read-only"};
      else
        result.error = ExecutionError{"SemanticError", msg};
      result.rows.clear();
      result.columns.clear();
      result.total_row_count = 0;
      return finish();
    }
  }

  result.truncated = result.total_row_count > limits.row_cap;
  return finish();
}

/// Compact table text for the agent: header, up to row_cap rows, a row-count
/// suffix when truncated, hard cap on total characters.
inline std::string render_observation(const ExecutionResult& result,
                                      const ExecutionLimits& limits = {}) {
  std::string out;
  if (!result.ok()) {
    out = "Error: " + result.error->kind + ": " + result.error->message;
  } else {
    for (std::size_t i = 0; i < result.columns.size(); ++i) {
      if (i > 0) out += " | ";
      out += result.columns[i];
    }
    if (result.rows.empty()) {
      out += "\n(empty result)";
    }
    for (const auto& row : result.rows) {
      out += "\n";
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i > 0) out += " | ";
        out += row[i];
      }
    }
    if (result.truncated) {
      out += "\n... (";
      if (result.count_is_lower_bound) out += ">= ";
      out += std::to_string(result.total_row_count) + " rows total)";
    }
  }
  const auto cap = static_cast<std::size_t>(limits.observation_char_cap);
  if (out.size() > cap) {
    out.resize(cap > 14 ? cap - 14 : 0);
    out += "...[truncated]";
  }
  return out;
}

}  // namespace itsql
