// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "itsql/error.hpp"
#include "itsql/sqlite.hpp"

namespace itsql {

enum class ColumnType { Text, Integer, Real, Date, Blob, Other };

inline std::string to_string(ColumnType t) {
  switch (t) {
    case ColumnType::Text: return "text";
    case ColumnType::Integer: return "integer";
    case ColumnType::Real: return "real";
    case ColumnType::Date: return "date";
    case ColumnType::Blob: return "blob";
    case ColumnType::Other: return "other";
  }
  return "other";
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

/// Maps a declared type string to a type class, following SQLite affinity
/// rules so the statistics variant is predictable.
inline ColumnType classify_declared_type(const std::string& declared) {
  std::string d = lower(declared);
  if (d.find("int") != std::string::npos) return ColumnType::Integer;
  if (d.find("char") != std::string::npos || d.find("text") != std::string::npos ||
      d.find("clob") != std::string::npos)
    return ColumnType::Text;
  if (d.find("real") != std::string::npos || d.find("floa") != std::string::npos ||
      d.find("doub") != std::string::npos || d.find("numeric") != std::string::npos ||
      d.find("decimal") != std::string::npos)
    return ColumnType::Real;
  if (d.find("date") != std::string::npos || d.find("time") != std::string::npos)
    return ColumnType::Date;
  if (d.find("blob") != std::string::npos || d.empty()) return ColumnType::Blob;
  return ColumnType::Other;
}

struct ColumnDef {
  std::string table;
  std::string name;
  ColumnType declared_type = ColumnType::Other;
  std::optional<std::string> description;
};

struct TableDef {
  std::string name;
  std::vector<ColumnDef> columns;
};

struct ForeignKey {
  std::string from_table;
  std::string from_column;
  std::string to_table;
  std::string to_column;
};

struct DatabaseSchema {
  std::string db_id;
  std::vector<TableDef> tables;
  std::vector<ForeignKey> relations;

  const TableDef* find_table(const std::string& name) const {
    std::string n = lower(name);
    for (const auto& t : tables)
      if (lower(t.name) == n) return &t;
    return nullptr;
  }

  const ColumnDef* find_column(const std::string& table,
                               const std::string& column) const {
    const TableDef* t = find_table(table);
    if (t == nullptr) return nullptr;
    std::string c = lower(column);
    for (const auto& col : t->columns)
      if (lower(col.name) == c) return &col;
    return nullptr;
  }

  std::size_t column_count() const {
    std::size_t n = 0;
    for (const auto& t : tables) n += t.columns.size();
    return n;
  }
};

// ---------------------------------------------------------------------------
// Column statistics

struct TextSample {
  std::vector<std::string> values;  // each truncated to 100 chars
};

struct NumericRange {
  std::string min;
  std::string max;
};

struct EmptyStats {};

using ColumnStatistics = std::variant<TextSample, NumericRange, EmptyStats>;

struct ColumnProfile {
  ColumnDef column;
  ColumnStatistics statistics = EmptyStats{};
};

inline constexpr std::size_t kTextSampleMaxChars = 100;
inline constexpr int kDefaultSampleSize = 3;

inline std::string render_statistics(const ColumnStatistics& stats) {
  if (std::holds_alternative<EmptyStats>(stats)) return "(no values)";
  if (const auto* r = std::get_if<NumericRange>(&stats))
    return "min=" + r->min + ", max=" + r->max;
  const auto& sample = std::get<TextSample>(stats);
  std::string out = "samples: ";
  for (std::size_t i = 0; i < sample.values.size(); ++i) {
    if (i > 0) out += ", ";
    out += "'" + sample.values[i] + "'";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Description map (BIRD database_description CSVs)

/// Keyed by (lowercased table, lowercased column).
using DescriptionMap = std::map<std::pair<std::string, std::string>, std::string>;

namespace detail {

/// One CSV line, RFC-4180 quoting. Returns fields; handles quoted commas and
/// doubled quotes.
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline std::string strip(std::string s) {
  auto issp = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && issp(s.front())) s.erase(s.begin());
  while (!s.empty() && issp(s.back())) s.pop_back();
  return s;
}

}  // namespace detail

/// Reads a BIRD-style `database_description/` folder: one CSV per table,
/// named `{table}.csv`, with `original_column_name` and `column_description`
/// columns. Tolerates UTF-8 BOM, CRLF, and quoted commas.
inline DescriptionMap load_description_folder(const std::filesystem::path& dir) {
  DescriptionMap out;
  if (!std::filesystem::is_directory(dir)) return out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".csv") continue;
    std::string table = lower(entry.path().stem().string());
    std::ifstream in(entry.path(), std::ios::binary);
    if (!in) continue;
    std::string line;
    int name_idx = -1;
    int desc_idx = -1;
    bool header = true;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (header) {
        if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
          line.erase(0, 3);
        auto cols = detail::split_csv_line(line);
        for (std::size_t i = 0; i < cols.size(); ++i) {
          std::string h = lower(detail::strip(cols[i]));
          if (h == "original_column_name") name_idx = static_cast<int>(i);
          if (h == "column_description") desc_idx = static_cast<int>(i);
        }
        header = false;
        continue;
      }
      if (name_idx < 0 || desc_idx < 0) break;
      auto cols = detail::split_csv_line(line);
      if (static_cast<int>(cols.size()) <= std::max(name_idx, desc_idx)) continue;
      std::string col = lower(detail::strip(cols[name_idx]));
      std::string desc = detail::strip(cols[desc_idx]);
      if (!col.empty() && !desc.empty()) out[{table, col}] = desc;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Introspection

/// Reads user tables, columns, declared types and foreign keys from a SQLite
/// file. Views and internal sqlite_* tables are excluded. Throws
/// DanglingForeignKey when an FK names a missing column.
inline DatabaseSchema introspect(const std::string& db_path,
                                 const std::string& db_id,
                                 const DescriptionMap& descriptions = {}) {
  SqliteHandle db = open_readonly(db_path);
  DatabaseSchema schema;
  schema.db_id = db_id;

  std::vector<std::string> table_names;
  {
    StmtHandle stmt = prepare(db.get(),
                              "SELECT name FROM sqlite_master WHERE type='table' "
                              "AND name NOT LIKE 'sqlite_%' ORDER BY name");
    while (sqlite3_step(stmt.get()) == SQLITE_ROW)
      table_names.push_back(column_text(stmt.get(), 0));
  }

  for (const auto& tname : table_names) {
    TableDef table;
    table.name = tname;
    StmtHandle stmt = prepare(db.get(), "PRAGMA table_info(\"" + tname + "\")");
    while (sqlite3_step(stmt.get()) == SQLITE_ROW) {
      ColumnDef col;
      col.table = tname;
      col.name = column_text(stmt.get(), 1);
      col.declared_type = classify_declared_type(column_text(stmt.get(), 2));
      auto it = descriptions.find({lower(tname), lower(col.name)});
      if (it != descriptions.end()) col.description = it->second;
      table.columns.push_back(std::move(col));
    }
    schema.tables.push_back(std::move(table));
  }

  for (const auto& tname : table_names) {
    StmtHandle stmt =
        prepare(db.get(), "PRAGMA foreign_key_list(\"" + tname + "\")");
    while (sqlite3_step(stmt.get()) == SQLITE_ROW) {
      ForeignKey fk;
      fk.from_table = tname;
      fk.from_column = column_text(stmt.get(), 3);
      fk.to_table = column_text(stmt.get(), 2);
      fk.to_column = column_text(stmt.get(), 4);
      if (fk.to_column.empty()) {
        // implicit reference to the target's primary key
        const char* pk_sql =
            "SELECT name FROM pragma_table_info(?) WHERE pk=1 LIMIT 1";
        StmtHandle pk = prepare(db.get(), pk_sql);
        sqlite3_bind_text(pk.get(), 1, fk.to_table.c_str(), -1, SQLITE_TRANSIENT);
        if (sqlite3_step(pk.get()) == SQLITE_ROW)
          fk.to_column = column_text(pk.get(), 0);
      }
      auto check = [&](const std::string& t, const std::string& c) {
        DatabaseSchema probe;
        probe.tables = schema.tables;
        if (probe.find_column(t, c) == nullptr)
          throw Error("DanglingForeignKey",
                      "foreign key references missing column " + t + "." + c +
                          " (declared on " + fk.from_table + "." +
                          fk.from_column + ")");
      };
      check(fk.from_table, fk.from_column);
      check(fk.to_table, fk.to_column);
      if (lower(fk.from_table) == lower(fk.to_table) &&
          lower(fk.from_column) == lower(fk.to_column))
        throw Error("DanglingForeignKey",
                    "self-loop foreign key on " + fk.from_table + "." +
                        fk.from_column);
      schema.relations.push_back(std::move(fk));
    }
  }
  return schema;
}

// ---------------------------------------------------------------------------
// Profiling

/// Samples distinct non-null cell values (text columns, seedable order,
/// truncated to 100 chars) or computes min/max (numeric/date). All-null or
/// empty columns profile to EmptyStats.
inline ColumnProfile profile_column(const std::string& db_path,
                                    const ColumnDef& column,
                                    int sample_size = kDefaultSampleSize,
                                    unsigned seed = 0) {
  SqliteHandle db = open_readonly(db_path);
  {
    StmtHandle probe =
        prepare(db.get(), "PRAGMA table_info(\"" + column.table + "\")");
    bool found = false;
    while (sqlite3_step(probe.get()) == SQLITE_ROW)
      if (lower(column_text(probe.get(), 1)) == lower(column.name)) found = true;
    if (!found)
      throw Error("ColumnMissing", column.table + "." + column.name);
  }

  ColumnProfile profile;
  profile.column = column;
  const std::string qcol = "\"" + column.name + "\"";
  const std::string qtab = "\"" + column.table + "\"";

  if (column.declared_type == ColumnType::Integer ||
      column.declared_type == ColumnType::Real ||
      column.declared_type == ColumnType::Date) {
    StmtHandle stmt = prepare(
        db.get(), "SELECT MIN(" + qcol + "), MAX(" + qcol + ") FROM " + qtab +
                      " WHERE " + qcol + " IS NOT NULL");
    if (sqlite3_step(stmt.get()) == SQLITE_ROW &&
        sqlite3_column_type(stmt.get(), 0) != SQLITE_NULL) {
      NumericRange range;
      range.min = column_text(stmt.get(), 0);
      range.max = column_text(stmt.get(), 1);
      profile.statistics = range;
    }
    return profile;
  }

  if (column.declared_type == ColumnType::Text) {
    StmtHandle stmt = prepare(db.get(), "SELECT DISTINCT " + qcol + " FROM " +
                                            qtab + " WHERE " + qcol +
                                            " IS NOT NULL ORDER BY " + qcol);
    std::vector<std::string> values;
    while (sqlite3_step(stmt.get()) == SQLITE_ROW)
      values.push_back(column_text(stmt.get(), 0));
    if (values.empty()) return profile;

    std::mt19937 rng(seed);
    std::shuffle(values.begin(), values.end(), rng);
    if (static_cast<int>(values.size()) > sample_size)
      values.resize(static_cast<std::size_t>(sample_size));
    for (auto& v : values)
      if (v.size() > kTextSampleMaxChars) v.resize(kTextSampleMaxChars);
    profile.statistics = TextSample{std::move(values)};
    return profile;
  }

  // blob/other columns carry no useful statistics
  return profile;
}

}  // namespace itsql
