// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "itsql/agent.hpp"
#include "itsql/error.hpp"

namespace itsql {

/// Default instruction text: tool descriptions, usage guidance, and the
/// required output format for the interaction loop.
inline const char* kDefaultInstruction =
    "You translate a natural-language question into a SQL query by "
    "interacting with a SQLite database through tools.\n"
    "\n"
    "Available tools:\n"
    "- SearchColumn(\"semantic\"): rank database columns by similarity to the "
    "phrase; returns column_name, table_name, column_type, column_desc and "
    "cell-value statistics for each hit.\n"
    "- SearchValue(\"value\", table=None, column=None): BM25 search over text "
    "cell values in the whole database, optionally restricted to a table or "
    "column.\n"
    "- FindShortestPath(\"column.table\", \"column.table\"): minimal join "
    "path between two columns over the foreign-key graph; returns the join "
    "chain to use in FROM/JOIN clauses.\n"
    "- ExecuteSQL(\"sql\"): run a read-only SQL query and see its result "
    "table.\n"
    "- Done(): finish. The most recent successfully executed SQL is the "
    "final answer (or pass the SQL explicitly: Done(\"SELECT ...\")).\n"
    "\n"
    "Work step by step: first locate the relevant columns and cell values, "
    "then find how their tables join, then build and execute the SQL, and "
    "finish with Done once the result answers the question.\n"
    "\n"
    "Respond with exactly one tool call per turn in this format:\n"
    "Thought: your reasoning\n"
    "Action: ToolName(\"arg\", ...)";

/// Loads one demonstration from a transcript-format text file: a leading
/// `Schema: ...` line, then the worked exemplar (Question / Thought / Action
/// / Observation lines).
inline Demonstration load_exemplar_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("FileNotReadable", "cannot read exemplar " + path);
  std::string line;
  Demonstration demo;
  std::string body;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (demo.schema_text.empty() && line.rfind("Schema:", 0) == 0) {
      demo.schema_text = line;
      continue;
    }
    if (!body.empty()) body += "\n";
    body += line;
  }
  if (demo.schema_text.empty())
    throw Error("MalformedRecord", path + ": missing leading 'Schema:' line");
  while (!body.empty() && body.back() == '\n') body.pop_back();
  demo.exemplars.push_back(std::move(body));
  return demo;
}

/// Loads every *.txt under a directory as demonstrations, sorted by filename
/// so prompt assembly stays deterministic.
inline std::vector<Demonstration> load_exemplar_dir(
    const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(dir))
    for (const auto& entry : std::filesystem::directory_iterator(dir))
      if (entry.path().extension() == ".txt") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<Demonstration> demos;
  for (const auto& f : files) demos.push_back(load_exemplar_file(f.string()));
  return demos;
}

}  // namespace itsql
