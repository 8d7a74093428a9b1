// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "itsql/error.hpp"
#include "itsql/schema.hpp"
#include "itsql/sqlite.hpp"

namespace itsql {

inline constexpr double kBm25K1 = 1.2;
inline constexpr double kBm25B = 0.75;
inline constexpr int kDefaultValueSearchK = 10;
inline constexpr const char* kValueIndexMagic = "itsql-value-index";
inline constexpr int kValueIndexVersion = 1;

/// Lowercase, split on non-alphanumeric, drop empty tokens.
inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c) != 0) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

struct ValueDoc {
  std::string table;
  std::string column;
  std::string value;
};

struct ValueHit {
  std::string table;
  std::string column;
  std::string value;
  double score = 0.0;
};

struct ValueIndex {
  std::string db_id;
  std::vector<ValueDoc> documents;
  std::map<std::string, std::vector<std::pair<std::size_t, int>>> postings;
  std::vector<int> doc_lengths;
  double avg_doc_length = 0.0;

  std::size_t total_docs() const { return documents.size(); }
};

/// Indexes every distinct non-null value of every text column exactly once.
/// Values that trim to empty are skipped.
inline ValueIndex build_value_index(const std::string& db_path,
                                    const DatabaseSchema& schema) {
  ValueIndex index;
  index.db_id = schema.db_id;
  SqliteHandle db = open_readonly(db_path);

  for (const auto& table : schema.tables) {
    for (const auto& col : table.columns) {
      if (col.declared_type != ColumnType::Text) continue;
      StmtHandle stmt = prepare(
          db.get(), "SELECT DISTINCT \"" + col.name + "\" FROM \"" +
                        table.name + "\" WHERE \"" + col.name +
                        "\" IS NOT NULL ORDER BY \"" + col.name + "\"");
      while (sqlite3_step(stmt.get()) == SQLITE_ROW) {
        std::string value = column_text(stmt.get(), 0);
        if (detail::strip(value).empty()) continue;
        index.documents.push_back({table.name, col.name, value});
      }
    }
  }

  long long total_len = 0;
  for (std::size_t i = 0; i < index.documents.size(); ++i) {
    auto tokens = tokenize(index.documents[i].value);
    index.doc_lengths.push_back(static_cast<int>(tokens.size()));
    total_len += static_cast<long long>(tokens.size());
    std::map<std::string, int> tf;
    for (const auto& t : tokens) tf[t] += 1;
    for (const auto& [term, count] : tf)
      index.postings[term].emplace_back(i, count);
  }
  index.avg_doc_length =
      index.documents.empty()
          ? 0.0
          : static_cast<double>(total_len) / index.documents.size();
  return index;
}

/// Non-negative Okapi IDF: ln((N - n + 0.5)/(n + 0.5) + 1).
inline double bm25_idf(std::size_t total_docs, std::size_t docs_with_term) {
  double n = static_cast<double>(total_docs);
  double df = static_cast<double>(docs_with_term);
  return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

/// Top-k documents by Okapi BM25. Scoping by table/column filters documents
/// but keeps corpus statistics (N, avgdl, IDF) global. Zero-score documents
/// are omitted; ties break by (table, column, value).
inline std::vector<ValueHit> search_value(
    const ValueIndex& index, const std::string& value,
    const std::optional<std::string>& table = std::nullopt,
    const std::optional<std::string>& column = std::nullopt,
    int k = kDefaultValueSearchK, const DatabaseSchema* schema = nullptr) {
  if (detail::strip(value).empty()) throw Error("EmptyQuery", "empty value");
  if (schema != nullptr) {
    if (table.has_value() && schema->find_table(*table) == nullptr)
      throw Error("UnknownTable", *table);
    if (column.has_value()) {
      bool found = false;
      if (table.has_value()) {
        found = schema->find_column(*table, *column) != nullptr;
      } else {
        for (const auto& t : schema->tables)
          if (schema->find_column(t.name, *column) != nullptr) found = true;
      }
      if (!found) throw Error("UnknownColumn", *column);
    }
  }

  auto query_terms = tokenize(value);
  std::map<std::size_t, double> scores;
  const std::size_t n_docs = index.total_docs();
  for (const auto& term : query_terms) {
    auto it = index.postings.find(term);
    if (it == index.postings.end()) continue;
    double idf = bm25_idf(n_docs, it->second.size());
    for (const auto& [doc_id, tf] : it->second) {
      double dl = static_cast<double>(index.doc_lengths[doc_id]);
      double denom =
          tf + kBm25K1 * (1.0 - kBm25B + kBm25B * dl / index.avg_doc_length);
      scores[doc_id] += idf * (tf * (kBm25K1 + 1.0)) / denom;
    }
  }

  std::vector<ValueHit> hits;
  for (const auto& [doc_id, score] : scores) {
    if (score <= 0.0) continue;
    const ValueDoc& doc = index.documents[doc_id];
    if (table.has_value() && lower(doc.table) != lower(*table)) continue;
    if (column.has_value() && lower(doc.column) != lower(*column)) continue;
    hits.push_back({doc.table, doc.column, doc.value, score});
  }
  std::sort(hits.begin(), hits.end(), [](const ValueHit& a, const ValueHit& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.table != b.table) return a.table < b.table;
    if (a.column != b.column) return a.column < b.column;
    return a.value < b.value;
  });
  if (k >= 0 && static_cast<std::size_t>(k) < hits.size())
    hits.resize(static_cast<std::size_t>(k));
  return hits;
}

// ---------------------------------------------------------------------------
// Persistence

inline void save_value_index(const ValueIndex& index, const std::string& path) {
  nlohmann::json j;
  j["magic"] = kValueIndexMagic;
  j["version"] = kValueIndexVersion;
  j["db_id"] = index.db_id;
  j["documents"] = nlohmann::json::array();
  for (const auto& d : index.documents)
    j["documents"].push_back({{"table", d.table},
                              {"column", d.column},
                              {"value", d.value}});
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("FileNotReadable", "cannot write " + path);
  out << j.dump();
}

inline ValueIndex load_value_index(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("FileNotReadable", "cannot read " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  if (!j.contains("magic") || j["magic"] != kValueIndexMagic ||
      !j.contains("version") || j["version"] != kValueIndexVersion)
    throw Error("StaleCache", path + " is not a current value index file");

  ValueIndex index;
  index.db_id = j.at("db_id").get<std::string>();
  long long total_len = 0;
  for (const auto& jd : j.at("documents")) {
    ValueDoc d{jd.at("table").get<std::string>(),
               jd.at("column").get<std::string>(),
               jd.at("value").get<std::string>()};
    std::size_t doc_id = index.documents.size();
    auto tokens = tokenize(d.value);
    index.doc_lengths.push_back(static_cast<int>(tokens.size()));
    total_len += static_cast<long long>(tokens.size());
    std::map<std::string, int> tf;
    for (const auto& t : tokens) tf[t] += 1;
    for (const auto& [term, count] : tf)
      index.postings[term].emplace_back(doc_id, count);
    index.documents.push_back(std::move(d));
  }
  index.avg_doc_length =
      index.documents.empty()
          ? 0.0
          : static_cast<double>(total_len) / index.documents.size();
  return index;
}

}  // namespace itsql
