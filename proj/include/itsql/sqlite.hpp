// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <sqlite3.h>

#include <memory>
#include <string>

#include "itsql/error.hpp"

namespace itsql {

struct SqliteCloser {
  void operator()(sqlite3* db) const noexcept {
    if (db != nullptr) sqlite3_close_v2(db);
  }
};

struct StmtFinalizer {
  void operator()(sqlite3_stmt* stmt) const noexcept {
    if (stmt != nullptr) sqlite3_finalize(stmt);
  }
};

using SqliteHandle = std::unique_ptr<sqlite3, SqliteCloser>;
using StmtHandle = std::unique_ptr<sqlite3_stmt, StmtFinalizer>;

/// Opens a database read-only. Throws FileNotReadable / NotASqliteFile.
inline SqliteHandle open_readonly(const std::string& path) {
  sqlite3* raw = nullptr;
  int rc = sqlite3_open_v2(path.c_str(), &raw, SQLITE_OPEN_READONLY, nullptr);
  SqliteHandle db(raw);
  if (rc != SQLITE_OK) {
    throw Error("FileNotReadable", path + ": " + sqlite3_errstr(rc));
  }
  // sqlite opens lazily; force a header read so a non-database file fails here.
  rc = sqlite3_exec(db.get(), "SELECT 1 FROM sqlite_master LIMIT 1", nullptr,
                    nullptr, nullptr);
  if (rc == SQLITE_NOTADB) {
    throw Error("NotASqliteFile", path);
  }
  if (rc != SQLITE_OK) {
    throw Error("FileNotReadable", path + ": " + sqlite3_errmsg(db.get()));
  }
  return db;
}

/// Opens read-write, creating the file if needed. Test fixtures and the toy
/// database builder use this; the agent-facing paths never do.
inline SqliteHandle open_readwrite(const std::string& path) {
  sqlite3* raw = nullptr;
  int rc = sqlite3_open_v2(path.c_str(), &raw,
                           SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE, nullptr);
  SqliteHandle db(raw);
  if (rc != SQLITE_OK) {
    throw Error("FileNotReadable", path + ": " + sqlite3_errstr(rc));
  }
  return db;
}

inline StmtHandle prepare(sqlite3* db, const std::string& sql) {
  sqlite3_stmt* raw = nullptr;
  int rc = sqlite3_prepare_v2(db, sql.c_str(), -1, &raw, nullptr);
  StmtHandle stmt(raw);
  if (rc != SQLITE_OK) {
    throw Error("QueryFailed", sqlite3_errmsg(db));
  }
  return stmt;
}

inline void exec(sqlite3* db, const std::string& sql) {
  char* errmsg = nullptr;
  int rc = sqlite3_exec(db, sql.c_str(), nullptr, nullptr, &errmsg);
  if (rc != SQLITE_OK) {
    std::string msg = errmsg != nullptr ? errmsg : sqlite3_errstr(rc);
    sqlite3_free(errmsg);
    throw Error("QueryFailed", msg);
  }
}

inline std::string column_text(sqlite3_stmt* stmt, int idx) {
  const unsigned char* p = sqlite3_column_text(stmt, idx);
  return p != nullptr ? reinterpret_cast<const char*>(p) : std::string();
}

}  // namespace itsql
