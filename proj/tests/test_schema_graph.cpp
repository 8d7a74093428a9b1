// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "itsql/schema.hpp"
#include "itsql/schema_graph.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace itsql;
using itsql::test::TempDir;

namespace {

DatabaseSchema chain_schema() {
  // A(id,name), B(id,a_id FK->A.id), C(id,b_id FK->B.id, val)
  DatabaseSchema schema;
  schema.db_id = "chain";
  schema.tables = {
      TableDef{"A",
               {{"A", "id", ColumnType::Integer, {}},
                {"A", "name", ColumnType::Text, {}}}},
      TableDef{"B",
               {{"B", "id", ColumnType::Integer, {}},
                {"B", "a_id", ColumnType::Integer, {}}}},
      TableDef{"C",
               {{"C", "id", ColumnType::Integer, {}},
                {"C", "b_id", ColumnType::Integer, {}},
                {"C", "val", ColumnType::Text, {}}}},
  };
  schema.relations = {{"B", "a_id", "A", "id"}, {"C", "b_id", "B", "id"}};
  return schema;
}

/// Random schema in the acceptance envelope: up to `max_tables` tables of up
/// to `max_cols` columns with a random FK set.
DatabaseSchema random_schema(std::mt19937& rng, int max_tables = 8,
                             int max_cols = 6) {
  DatabaseSchema schema;
  schema.db_id = "random";
  std::uniform_int_distribution<int> table_count(2, max_tables);
  std::uniform_int_distribution<int> col_count(1, max_cols);
  int n_tables = table_count(rng);
  for (int t = 0; t < n_tables; ++t) {
    TableDef table;
    table.name = "t" + std::to_string(t);
    int n_cols = col_count(rng);
    for (int c = 0; c < n_cols; ++c)
      table.columns.push_back(
          {table.name, "c" + std::to_string(c), ColumnType::Integer, {}});
    schema.tables.push_back(std::move(table));
  }
  std::uniform_int_distribution<int> fk_count(0, 2 * n_tables);
  std::uniform_int_distribution<int> pick_table(0, n_tables - 1);
  int n_fks = fk_count(rng);
  for (int i = 0; i < n_fks; ++i) {
    int from = pick_table(rng);
    int to = pick_table(rng);
    if (from == to) continue;
    const auto& ft = schema.tables[from];
    const auto& tt = schema.tables[to];
    std::uniform_int_distribution<int> pick_from(
        0, static_cast<int>(ft.columns.size()) - 1);
    std::uniform_int_distribution<int> pick_to(
        0, static_cast<int>(tt.columns.size()) - 1);
    schema.relations.push_back({ft.name, ft.columns[pick_from(rng)].name,
                                tt.name, tt.columns[pick_to(rng)].name});
  }
  return schema;
}

test::oracle::TableGraph table_graph_of(const DatabaseSchema& schema) {
  test::oracle::TableGraph graph;
  graph.table_count = schema.tables.size();
  std::map<std::string, std::size_t> table_index;
  for (std::size_t i = 0; i < schema.tables.size(); ++i)
    table_index[schema.tables[i].name] = i;
  for (const auto& fk : schema.relations) {
    std::size_t a = table_index[fk.from_table];
    std::size_t b = table_index[fk.to_table];
    graph.edges.insert({std::min(a, b), std::max(a, b)});
  }
  return graph;
}

}  // namespace

TEST_CASE("build_schema_graph counts nodes and fk edges") {
  TempDir tmp;
  auto db_path = tmp.file("ab.sqlite");
  test::make_db(db_path, test::kToyAbDdl);
  auto schema = introspect(db_path, "ab");
  auto graph = build_schema_graph(schema);
  CHECK(graph.nodes.size() == 4);
  CHECK(graph.fks.size() == 1);
}

TEST_CASE("single table: any column pair reachable at zero joins") {
  DatabaseSchema schema;
  schema.db_id = "one";
  schema.tables = {TableDef{"t",
                            {{"t", "a", ColumnType::Integer, {}},
                             {"t", "b", ColumnType::Integer, {}},
                             {"t", "c", ColumnType::Integer, {}}}}};
  auto graph = build_schema_graph(schema);
  CHECK(graph.nodes.size() == 3);
  CHECK(graph.fks.empty());
  auto path = find_shortest_path(graph, "a.t", "c.t");
  CHECK(path.join_count == 0);
  CHECK(path.rendered == "t");
}

TEST_CASE("start equals end is a single-node path") {
  auto graph = build_schema_graph(chain_schema());
  auto path = find_shortest_path(graph, "id.A", "id.A");
  CHECK(path.join_count == 0);
  REQUIRE(path.nodes.size() == 1);
  CHECK(path.nodes[0] == "id.A");
}

TEST_CASE("two-hop chain joins through both foreign keys") {
  auto graph = build_schema_graph(chain_schema());
  auto path = find_shortest_path(graph, "name.A", "val.C");
  CHECK(path.join_count == 2);
  CHECK(path.rendered == "A JOIN B ON A.id = B.a_id JOIN C ON B.id = C.b_id");

  // symmetry of cost
  CHECK(find_shortest_path(graph, "val.C", "name.A").join_count == 2);
}

TEST_CASE("disconnected components raise NoPath naming both tables") {
  DatabaseSchema schema;
  schema.db_id = "two";
  schema.tables = {TableDef{"left", {{"left", "x", ColumnType::Integer, {}}}},
                   TableDef{"right", {{"right", "y", ColumnType::Integer, {}}}}};
  auto graph = build_schema_graph(schema);
  try {
    find_shortest_path(graph, "x.left", "y.right");
    FAIL("expected NoPath");
  } catch (const Error& e) {
    CHECK(e.kind() == "NoPath");
    std::string msg = e.what();
    CHECK(msg.find("left") != std::string::npos);
    CHECK(msg.find("right") != std::string::npos);
  }
}

TEST_CASE("unknown node suggests the nearest id") {
  auto graph = build_schema_graph(chain_schema());
  try {
    find_shortest_path(graph, "nme.A", "val.C");
    FAIL("expected UnknownNode");
  } catch (const Error& e) {
    CHECK(e.kind() == "UnknownNode");
    CHECK(std::string(e.what()).find("name.A") != std::string::npos);
  }
}

TEST_CASE("table.column order is accepted when unambiguous") {
  auto graph = build_schema_graph(chain_schema());
  auto path = find_shortest_path(graph, "A.name", "C.val");
  CHECK(path.join_count == 2);

  // ambiguous parse: table 'x' with column 'y' and table 'y' with column 'x'
  DatabaseSchema schema;
  schema.db_id = "amb";
  schema.tables = {TableDef{"x", {{"x", "y", ColumnType::Integer, {}}}},
                   TableDef{"y", {{"y", "x", ColumnType::Integer, {}}}}};
  auto amb = build_schema_graph(schema);
  CHECK_THROWS_AS(resolve_node_id(amb, "x.y"), Error);
}

TEST_CASE("node ids round-trip through parse and render") {
  auto graph = build_schema_graph(chain_schema());
  for (const auto& node : graph.nodes)
    CHECK(resolve_node_id(graph, node.id) == node.id);
}

TEST_CASE("repeated calls return the identical path") {
  auto graph = build_schema_graph(chain_schema());
  auto a = find_shortest_path(graph, "name.A", "val.C");
  auto b = find_shortest_path(graph, "name.A", "val.C");
  CHECK(a.nodes == b.nodes);
  CHECK(a.rendered == b.rendered);
}

TEST_CASE("join counts agree with exhaustive enumeration on random schemas") {
  std::mt19937 rng(20240817);
  for (int trial = 0; trial < 50; ++trial) {
    auto schema = random_schema(rng);
    auto graph = build_schema_graph(schema);
    auto oracle_graph = table_graph_of(schema);

    std::map<std::string, std::size_t> table_index;
    for (std::size_t i = 0; i < schema.tables.size(); ++i)
      table_index[schema.tables[i].name] = i;

    for (const auto& from : graph.nodes) {
      for (const auto& to : graph.nodes) {
        int expected = test::oracle::min_join_count(
            oracle_graph, table_index[from.table], table_index[to.table]);
        if (expected < 0) {
          CHECK_THROWS_AS(find_shortest_path(graph, from.id, to.id), Error);
        } else {
          auto path = find_shortest_path(graph, from.id, to.id);
          REQUIRE(path.join_count == expected);
        }
      }
    }
  }
}
