// SPDX-License-Identifier: Apache-2.0
#pragma once

// Owns everything a Toolset borrows, so agent tests can stand up a fully
// functional environment on the toy bank database in one line.

#include <memory>
#include <string>

#include "itsql/agent.hpp"
#include "itsql/column_index.hpp"
#include "itsql/embedding.hpp"
#include "itsql/schema.hpp"
#include "itsql/schema_graph.hpp"
#include "itsql/value_index.hpp"
#include "support/fixtures.hpp"

namespace itsql::test {

struct ToolsetFixture {
  TempDir tmp;
  std::string db_path;
  DatabaseSchema schema;
  ColumnIndex column_index;
  ValueIndex value_index;
  SchemaGraph graph;
  OfflineNgramEmbedder embedder;
  Toolset tools;

  explicit ToolsetFixture(const char* ddl = kToyBankDdl,
                          const std::string& db_id = "toy_bank") {
    db_path = tmp.file(db_id + ".sqlite");
    make_db(db_path, ddl);
    schema = introspect(db_path, db_id);

    std::vector<ColumnProfile> profiles;
    for (const auto& t : schema.tables)
      for (const auto& c : t.columns)
        profiles.push_back(profile_column(db_path, c, 3, 0));
    column_index = build_column_index(schema, profiles, embedder);
    value_index = build_value_index(db_path, schema);
    graph = build_schema_graph(schema);

    tools.db_path = db_path;
    tools.schema = &schema;
    tools.column_index = &column_index;
    tools.value_index = &value_index;
    tools.graph = &graph;
    tools.embedder = &embedder;
  }
};

}  // namespace itsql::test
