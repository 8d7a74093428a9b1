// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "itsql/schema.hpp"
#include "itsql/value_index.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace itsql;
using itsql::test::TempDir;

namespace {

ValueIndex bank_index(const TempDir& tmp, std::string* db_path_out = nullptr,
                      DatabaseSchema* schema_out = nullptr) {
  auto db_path = tmp.file("bank.sqlite");
  test::make_db(db_path, test::kToyBankDdl);
  auto schema = introspect(db_path, "bank");
  auto index = build_value_index(db_path, schema);
  if (db_path_out != nullptr) *db_path_out = db_path;
  if (schema_out != nullptr) *schema_out = schema;
  return index;
}

}  // namespace

TEST_CASE("build_value_index indexes distinct text values only") {
  TempDir tmp;
  auto db_path = tmp.file("v.sqlite");
  test::make_db(db_path, R"sql(
    CREATE TABLE d (name TEXT, pop INTEGER);
    INSERT INTO d VALUES ('North Bohemia', 100), ('Prague', 200),
                         ('North Bohemia', 300);
  )sql");
  auto schema = introspect(db_path, "v");
  auto index = build_value_index(db_path, schema);

  // duplicates within one column indexed once; integers not indexed at all
  REQUIRE(index.total_docs() == 2);
  CHECK(index.postings.count("north") == 1);
  CHECK(index.postings.count("bohemia") == 1);
  CHECK(index.postings.count("prague") == 1);
  CHECK(index.postings.count("100") == 0);
}

TEST_CASE("integer-only database builds an empty index") {
  TempDir tmp;
  auto db_path = tmp.file("ints.sqlite");
  test::make_db(db_path,
                "CREATE TABLE t (a INTEGER, b REAL);"
                "INSERT INTO t VALUES (1, 2.0);");
  auto schema = introspect(db_path, "ints");
  auto index = build_value_index(db_path, schema);
  CHECK(index.total_docs() == 0);
  CHECK(search_value(index, "anything").empty());
}

TEST_CASE("duplicate value across two columns yields two documents") {
  TempDir tmp;
  auto db_path = tmp.file("dup.sqlite");
  test::make_db(db_path, R"sql(
    CREATE TABLE t (x TEXT, y TEXT);
    INSERT INTO t VALUES ('shared', 'shared');
  )sql");
  auto schema = introspect(db_path, "dup");
  auto index = build_value_index(db_path, schema);
  REQUIRE(index.total_docs() == 2);
  CHECK(index.documents[0].column != index.documents[1].column);
}

TEST_CASE("search_value matches the brute-force BM25 oracle") {
  TempDir tmp;
  auto index = bank_index(tmp);

  std::vector<std::string> docs;
  for (const auto& d : index.documents) docs.push_back(d.value);

  for (const std::string query :
       {"north bohemia", "Prague", "Liberec", "mesto", "bohemia moravia"}) {
    auto oracle_scores = test::oracle::bm25_scores(docs, query);
    auto hits = search_value(index, query, std::nullopt, std::nullopt, 1000);
    std::map<std::pair<std::string, std::string>, double> hit_scores;
    for (const auto& h : hits) hit_scores[{h.column, h.value}] = h.score;

    for (std::size_t i = 0; i < docs.size(); ++i) {
      auto key = std::make_pair(index.documents[i].column,
                                index.documents[i].value);
      if (oracle_scores[i] > 0.0) {
        REQUIRE(hit_scores.count(key) == 1);
        CHECK(std::abs(hit_scores[key] - oracle_scores[i]) < 1e-9);
      } else {
        CHECK(hit_scores.count(key) == 0);  // zero-score docs omitted
      }
    }
  }
}

TEST_CASE("top hit and scoping behavior") {
  TempDir tmp;
  std::string db_path;
  DatabaseSchema schema;
  auto index = bank_index(tmp, &db_path, &schema);

  auto hits = search_value(index, "north bohemia");
  REQUIRE_FALSE(hits.empty());
  CHECK(hits[0].value == "North Bohemia");
  CHECK(hits[0].table == "district");

  // scope filter: no district text lives in table account
  CHECK(search_value(index, "prague", std::string("account"), std::nullopt,
                     10, &schema)
            .empty());

  // scoped search equals unscoped search post-filtered (global statistics)
  auto scoped = search_value(index, "mesto", std::string("district"),
                             std::nullopt, 1000, &schema);
  auto unscoped = search_value(index, "mesto", std::nullopt, std::nullopt, 1000);
  std::vector<ValueHit> filtered;
  for (const auto& h : unscoped)
    if (lower(h.table) == "district") filtered.push_back(h);
  REQUIRE(scoped.size() == filtered.size());
  for (std::size_t i = 0; i < scoped.size(); ++i) {
    CHECK(scoped[i].value == filtered[i].value);
    CHECK(std::abs(scoped[i].score - filtered[i].score) < 1e-12);
  }
}

TEST_CASE("search_value error paths") {
  TempDir tmp;
  std::string db_path;
  DatabaseSchema schema;
  auto index = bank_index(tmp, &db_path, &schema);

  CHECK(search_value(index, "zzz").empty());
  CHECK_THROWS_AS(search_value(index, "   "), Error);
  try {
    search_value(index, "x", std::string("nope"), std::nullopt, 10, &schema);
    FAIL("expected UnknownTable");
  } catch (const Error& e) {
    CHECK(e.kind() == "UnknownTable");
  }
  try {
    search_value(index, "x", std::nullopt, std::string("ghost"), 10, &schema);
    FAIL("expected UnknownColumn");
  } catch (const Error& e) {
    CHECK(e.kind() == "UnknownColumn");
  }
}

TEST_CASE("adding an unrelated document keeps oracle agreement") {
  TempDir tmp;
  auto db_path = tmp.file("grow.sqlite");
  test::make_db(db_path, R"sql(
    CREATE TABLE t (v TEXT);
    INSERT INTO t VALUES ('alpha beta'), ('beta gamma');
  )sql");
  auto schema = introspect(db_path, "grow");
  auto before = build_value_index(db_path, schema);

  {
    auto db = open_readwrite(db_path);
    exec(db.get(), "INSERT INTO t VALUES ('unrelated words entirely');");
  }
  auto after = build_value_index(db_path, schema);

  for (const auto* index : {&before, &after}) {
    std::vector<std::string> docs;
    for (const auto& d : index->documents) docs.push_back(d.value);
    auto oracle_scores = test::oracle::bm25_scores(docs, "beta");
    auto hits = search_value(*index, "beta", std::nullopt, std::nullopt, 100);
    for (const auto& h : hits) {
      bool matched = false;
      for (std::size_t i = 0; i < docs.size(); ++i)
        if (docs[i] == h.value && std::abs(oracle_scores[i] - h.score) < 1e-9)
          matched = true;
      CHECK(matched);
    }
  }
}

TEST_CASE("value index round-trips through persistence") {
  TempDir tmp;
  auto index = bank_index(tmp);
  auto path = tmp.file("bank.value-index");
  save_value_index(index, path);
  auto loaded = load_value_index(path);

  auto a = search_value(index, "north bohemia");
  auto b = search_value(loaded, "north bohemia");
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].value == b[i].value);
    CHECK(a[i].score == b[i].score);
  }

  // stale cache rejected, not misread
  std::ofstream(tmp.file("stale.value-index"))
      << R"({"magic":"itsql-value-index","version":0,"db_id":"x","documents":[]})";
  CHECK_THROWS_AS(load_value_index(tmp.file("stale.value-index")), Error);
}
