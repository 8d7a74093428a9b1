// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "itsql/embedding.hpp"
#include "itsql/error.hpp"
#include "itsql/schema.hpp"

namespace itsql {

inline constexpr int kDefaultColumnSearchK = 10;
inline constexpr const char* kColumnIndexMagic = "itsql-column-index";
inline constexpr int kColumnIndexVersion = 1;

/// Embedding template: "a column named {name} in table {table}", with
/// " about {desc}" appended when a description is available.
inline std::string render_column_text(const ColumnDef& column) {
  std::string text =
      "a column named " + column.name + " in table " + column.table;
  if (column.description.has_value()) text += " about " + *column.description;
  return text;
}

struct ColumnIndexEntry {
  ColumnDef column;
  std::string text;
  std::vector<double> vector;
  ColumnProfile profile;
};

struct ColumnIndex {
  std::string db_id;
  std::vector<ColumnIndexEntry> entries;
};

struct ColumnHit {
  std::string column_name;
  std::string table_name;
  std::string column_type;
  std::string column_desc;
  std::string column_statistics;
  double score = 0.0;
};

/// One entry per schema column: rendered text, embedding vector, profile.
/// Profiles must cover every column of the schema.
inline ColumnIndex build_column_index(const DatabaseSchema& schema,
                                      const std::vector<ColumnProfile>& profiles,
                                      EmbeddingProvider& embedder) {
  ColumnIndex index;
  index.db_id = schema.db_id;

  std::vector<std::string> texts;
  std::vector<const ColumnDef*> columns;
  for (const auto& table : schema.tables)
    for (const auto& col : table.columns) {
      columns.push_back(&col);
      texts.push_back(render_column_text(col));
    }
  if (columns.empty()) return index;

  auto vectors = embedder.embed(texts);
  if (vectors.size() != texts.size())
    throw Error("DimensionMismatch",
                "embedder returned " + std::to_string(vectors.size()) +
                    " vectors for " + std::to_string(texts.size()) + " texts");
  const std::size_t dim = vectors.empty() ? 0 : vectors.front().size();
  for (const auto& v : vectors)
    if (v.size() != dim)
      throw Error("DimensionMismatch", "non-uniform vector dimensions");

  for (std::size_t i = 0; i < columns.size(); ++i) {
    ColumnIndexEntry entry;
    entry.column = *columns[i];
    entry.text = texts[i];
    entry.vector = std::move(vectors[i]);
    auto it = std::find_if(profiles.begin(), profiles.end(), [&](const auto& p) {
      return lower(p.column.table) == lower(columns[i]->table) &&
             lower(p.column.name) == lower(columns[i]->name);
    });
    if (it == profiles.end())
      throw Error("DimensionMismatch",
                  "no profile for column " + columns[i]->table + "." +
                      columns[i]->name);
    entry.profile = *it;
    index.entries.push_back(std::move(entry));
  }
  return index;
}

/// Top-k entries by cosine similarity to the embedded query. Ties break by
/// (table_name, column_name). k beyond the index size returns everything.
inline std::vector<ColumnHit> search_column(const ColumnIndex& index,
                                            const std::string& semantic,
                                            EmbeddingProvider& embedder,
                                            int k = kDefaultColumnSearchK) {
  if (index.entries.empty()) return {};
  auto query_vectors = embedder.embed({semantic});
  if (query_vectors.size() != 1)
    throw Error("EmbedderFailure", "query embedding failed");
  const auto& query = query_vectors.front();

  std::vector<ColumnHit> hits;
  hits.reserve(index.entries.size());
  for (const auto& entry : index.entries) {
    ColumnHit hit;
    hit.column_name = entry.column.name;
    hit.table_name = entry.column.table;
    hit.column_type = to_string(entry.column.declared_type);
    hit.column_desc = entry.column.description.value_or("");
    hit.column_statistics = render_statistics(entry.profile.statistics);
    hit.score = cosine_similarity(query, entry.vector);
    hits.push_back(std::move(hit));
  }
  std::sort(hits.begin(), hits.end(), [](const ColumnHit& a, const ColumnHit& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.table_name != b.table_name) return a.table_name < b.table_name;
    return a.column_name < b.column_name;
  });
  if (k >= 0 && static_cast<std::size_t>(k) < hits.size())
    hits.resize(static_cast<std::size_t>(k));
  return hits;
}

// ---------------------------------------------------------------------------
// Persistence (versioned JSON with a magic header; stale caches rejected)

namespace detail {

inline nlohmann::json statistics_to_json(const ColumnStatistics& stats) {
  nlohmann::json j;
  if (const auto* s = std::get_if<TextSample>(&stats)) {
    j["kind"] = "text_sample";
    j["values"] = s->values;
  } else if (const auto* r = std::get_if<NumericRange>(&stats)) {
    j["kind"] = "numeric_range";
    j["min"] = r->min;
    j["max"] = r->max;
  } else {
    j["kind"] = "empty";
  }
  return j;
}

inline ColumnStatistics statistics_from_json(const nlohmann::json& j) {
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "text_sample")
    return TextSample{j.at("values").get<std::vector<std::string>>()};
  if (kind == "numeric_range")
    return NumericRange{j.at("min").get<std::string>(),
                        j.at("max").get<std::string>()};
  return EmptyStats{};
}

inline nlohmann::json column_to_json(const ColumnDef& c) {
  nlohmann::json j{{"table", c.table},
                   {"name", c.name},
                   {"type", to_string(c.declared_type)}};
  if (c.description.has_value()) j["desc"] = *c.description;
  return j;
}

inline ColumnDef column_from_json(const nlohmann::json& j) {
  ColumnDef c;
  c.table = j.at("table").get<std::string>();
  c.name = j.at("name").get<std::string>();
  std::string t = j.at("type").get<std::string>();
  c.declared_type = t == "text"      ? ColumnType::Text
                    : t == "integer" ? ColumnType::Integer
                    : t == "real"    ? ColumnType::Real
                    : t == "date"    ? ColumnType::Date
                    : t == "blob"    ? ColumnType::Blob
                                     : ColumnType::Other;
  if (j.contains("desc")) c.description = j.at("desc").get<std::string>();
  return c;
}

}  // namespace detail

inline void save_column_index(const ColumnIndex& index,
                              const std::string& path) {
  nlohmann::json j;
  j["magic"] = kColumnIndexMagic;
  j["version"] = kColumnIndexVersion;
  j["db_id"] = index.db_id;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : index.entries) {
    nlohmann::json je;
    je["column"] = detail::column_to_json(e.column);
    je["text"] = e.text;
    je["vector"] = e.vector;
    je["profile_column"] = detail::column_to_json(e.profile.column);
    je["statistics"] = detail::statistics_to_json(e.profile.statistics);
    j["entries"].push_back(std::move(je));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("FileNotReadable", "cannot write " + path);
  out << j.dump();
}

inline ColumnIndex load_column_index(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("FileNotReadable", "cannot read " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, true);
  if (!j.contains("magic") || j["magic"] != kColumnIndexMagic ||
      !j.contains("version") || j["version"] != kColumnIndexVersion)
    throw Error("StaleCache", path + " is not a current column index file");
  ColumnIndex index;
  index.db_id = j.at("db_id").get<std::string>();
  for (const auto& je : j.at("entries")) {
    ColumnIndexEntry e;
    e.column = detail::column_from_json(je.at("column"));
    e.text = je.at("text").get<std::string>();
    e.vector = je.at("vector").get<std::vector<double>>();
    e.profile.column = detail::column_from_json(je.at("profile_column"));
    e.profile.statistics = detail::statistics_from_json(je.at("statistics"));
    index.entries.push_back(std::move(e));
  }
  return index;
}

}  // namespace itsql
