// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "itsql/agent.hpp"
#include "itsql/prompts.hpp"
#include "support/toolset_fixture.hpp"

using namespace itsql;
using itsql::test::ToolsetFixture;

namespace {

PromptBundle minimal_prompt(const DatabaseSchema& schema,
                            const std::string& question,
                            std::optional<std::string> evidence = {}) {
  Demonstration demo;
  demo.schema_text = "Schema: Tables: d (0 foreign keys)";
  demo.exemplars = {"Question: demo\nThought: t\nAction: Done()"};
  return build_prompt("INSTRUCTION", {demo}, schema, question,
                      std::move(evidence));
}

}  // namespace

// ---------------------------------------------------------------------------
// Prompt assembly

TEST_CASE("prompt serializes in instruction/demos/schema/question order") {
  DatabaseSchema schema;
  schema.db_id = "x";
  schema.tables = {TableDef{"alpha", {{"alpha", "a", ColumnType::Text, {}}}},
                   TableDef{"beta", {{"beta", "b", ColumnType::Text, {}}}}};
  auto bundle = minimal_prompt(schema, "what?");
  auto text = serialize_prompt(bundle);

  auto pos_inst = text.find("INSTRUCTION");
  auto pos_demo = text.find("Question: demo");
  auto pos_schema = text.find("Schema: Tables: alpha, beta (0 foreign keys)");
  auto pos_question = text.find("Question: what?");
  REQUIRE(pos_inst != std::string::npos);
  REQUIRE(pos_demo != std::string::npos);
  REQUIRE(pos_schema != std::string::npos);
  REQUIRE(pos_question != std::string::npos);
  CHECK(pos_inst < pos_demo);
  CHECK(pos_demo < pos_schema);
  CHECK(pos_schema < pos_question);
}

TEST_CASE("evidence line follows the question") {
  DatabaseSchema schema;
  schema.db_id = "x";
  schema.tables = {TableDef{"t", {{"t", "c", ColumnType::Text, {}}}}};
  auto bundle = minimal_prompt(schema, "q?", std::string("region means A3"));
  const std::string expected =
      "INSTRUCTION\n"
      "\n"
      "Schema: Tables: d (0 foreign keys)\n"
      "Question: demo\nThought: t\nAction: Done()\n"
      "\n"
      "Schema: Tables: t (0 foreign keys)\n"
      "Question: q?\n"
      "Evidence: region means A3\n";
  CHECK(serialize_prompt(bundle) == expected);
}

TEST_CASE("empty demonstration list is a configuration error") {
  DatabaseSchema schema;
  schema.db_id = "x";
  CHECK_THROWS_AS(build_prompt("inst", {}, schema, "q"), Error);
}

// ---------------------------------------------------------------------------
// Action grammar

TEST_CASE("parse_action handles thought plus action") {
  auto result = parse_action(
      "Thought: find the column.\nAction: SearchColumn(\"school name\")");
  auto& parsed = std::get<ParsedTurn>(result);
  CHECK(parsed.thought == "find the column.");
  CHECK(parsed.action.kind == ActionKind::SearchColumn);
  REQUIRE(parsed.action.args.size() == 1);
  CHECK(parsed.action.args[0] == "school name");
}

TEST_CASE("parse_action accepts a missing thought") {
  auto result = parse_action("Action: FindShortestPath(\"id.A\", \"val.C\")");
  auto& parsed = std::get<ParsedTurn>(result);
  CHECK(parsed.thought.empty());
  CHECK(parsed.action.kind == ActionKind::FindShortestPath);
  CHECK(parsed.action.args ==
        std::vector<std::string>{"id.A", "val.C"});
}

TEST_CASE("unknown action names fail to parse") {
  auto result = parse_action("Action: Fetch(\"x\")");
  auto& failure = std::get<ParseFailure>(result);
  CHECK(failure.reason == "unknown action Fetch");
}

TEST_CASE("keyword arguments parse as strings or None") {
  auto result = parse_action(
      "Action: SearchValue(\"prague\", table=\"account\", column=None)");
  auto& parsed = std::get<ParsedTurn>(result);
  REQUIRE(parsed.action.kwargs.count("table") == 1);
  CHECK(parsed.action.kwargs.at("table") == std::optional<std::string>("account"));
  REQUIRE(parsed.action.kwargs.count("column") == 1);
  CHECK_FALSE(parsed.action.kwargs.at("column").has_value());
}

TEST_CASE("Done takes zero args or one SQL string") {
  CHECK(std::holds_alternative<ParsedTurn>(parse_action("Action: Done()")));
  auto result = parse_action("Action: Done(\"SELECT 1\")");
  auto& parsed = std::get<ParsedTurn>(result);
  CHECK(parsed.action.args[0] == "SELECT 1");
  CHECK(std::holds_alternative<ParseFailure>(
      parse_action("Action: Done(\"a\", \"b\")")));
}

TEST_CASE("malformed outputs produce one-line reasons") {
  CHECK(std::get<ParseFailure>(parse_action("no action here")).reason ==
        "no 'Action:' line found");
  CHECK_FALSE(std::get<ParseFailure>(parse_action("Action: SearchColumn(\"x"))
                  .reason.empty());
  CHECK_FALSE(
      std::get<ParseFailure>(parse_action("Action: SearchColumn()"))
          .reason.empty());
  // escaped quote inside a SQL string survives
  auto result =
      parse_action(R"(Action: ExecuteSQL("SELECT \"a\" FROM t"))");
  CHECK(std::get<ParsedTurn>(result).action.args[0] == "SELECT \"a\" FROM t");
}

// ---------------------------------------------------------------------------
// Dispatch

TEST_CASE("dispatch routes each action kind") {
  ToolsetFixture fx;

  auto obs = dispatch_action(
      std::get<ParsedTurn>(parse_action("Action: ExecuteSQL(\"SELECT 1\")"))
          .action,
      fx.tools);
  CHECK(obs == "1\n1");

  obs = dispatch_action(
      std::get<ParsedTurn>(parse_action("Action: SearchValue(\"north bohemia\")"))
          .action,
      fx.tools);
  CHECK(obs.find("table=district") != std::string::npos);
  CHECK(obs.find("value='North Bohemia'") != std::string::npos);

  obs = dispatch_action(
      std::get<ParsedTurn>(
          parse_action("Action: SearchColumn(\"region of district\")"))
          .action,
      fx.tools);
  CHECK(obs.find("column_name=") != std::string::npos);

  obs = dispatch_action(
      std::get<ParsedTurn>(parse_action(
          "Action: FindShortestPath(\"district_id.account\", \"region.district\")"))
          .action,
      fx.tools);
  CHECK(obs.find("account JOIN district") != std::string::npos);
}

TEST_CASE("tool errors become observations, never exceptions") {
  ToolsetFixture fx;
  auto obs = dispatch_action(
      std::get<ParsedTurn>(
          parse_action("Action: FindShortestPath(\"ghost.x\", \"region.district\")"))
          .action,
      fx.tools);
  CHECK(obs.rfind("Error: UnknownNode", 0) == 0);

  obs = dispatch_action(
      std::get<ParsedTurn>(
          parse_action("Action: SearchValue(\"x\", table=\"nope\")"))
          .action,
      fx.tools);
  CHECK(obs.rfind("Error: UnknownTable", 0) == 0);
}

// ---------------------------------------------------------------------------
// Session loop

TEST_CASE("scripted session reaches Done with the executed SQL") {
  ToolsetFixture fx;
  const std::string sql =
      "SELECT COUNT(*) FROM account JOIN district ON account.district_id = "
      "district.district_id WHERE district.region = 'North Bohemia'";
  ScriptedBackend backend({
      "Thought: locate columns\nAction: SearchColumn(\"account\")",
      "Thought: locate value\nAction: SearchValue(\"North Bohemia\")",
      "Thought: join\nAction: FindShortestPath(\"district_id.account\", "
      "\"region.district\")",
      "Thought: run\nAction: ExecuteSQL(\"" + sql + "\")",
      "Thought: finished\nAction: Done()",
  });
  auto prompt = minimal_prompt(fx.schema, "How many accounts in North Bohemia?");
  auto transcript = run_session(backend, fx.tools, prompt);

  CHECK(transcript.finish == FinishReason::Done);
  REQUIRE(transcript.final_sql.has_value());
  CHECK(*transcript.final_sql == sql);
  CHECK(transcript.turns.size() == 5);
  CHECK(transcript.turns[3].observation.find("3") != std::string::npos);
  CHECK(transcript.usage.size() == 5);
  CHECK(transcript.total_tokens() > 0);
}

TEST_CASE("backend that never emits Done stops at max_turns") {
  ToolsetFixture fx;
  std::vector<std::string> outputs(10, "Action: ExecuteSQL(\"SELECT 1\")");
  ScriptedBackend backend(outputs);
  auto prompt = minimal_prompt(fx.schema, "q");
  auto transcript = run_session(backend, fx.tools, prompt, {}, 5);
  CHECK(transcript.finish == FinishReason::MaxTurns);
  CHECK(transcript.turns.size() == 5);
  REQUIRE(transcript.final_sql.has_value());
  CHECK(*transcript.final_sql == "SELECT 1");
}

TEST_CASE("backend failure preserves completed turns") {
  ToolsetFixture fx;
  ScriptedBackend backend({"Action: ExecuteSQL(\"SELECT 1\")"});
  auto prompt = minimal_prompt(fx.schema, "q");
  auto transcript = run_session(backend, fx.tools, prompt, {}, 5);
  CHECK(transcript.finish == FinishReason::BackendError);
  CHECK(transcript.turns.size() == 1);
  CHECK(*transcript.final_sql == "SELECT 1");
}

TEST_CASE("unparseable outputs append a ParseFailure observation") {
  ToolsetFixture fx;
  ScriptedBackend backend({"gibberish", "Action: Done(\"SELECT 2\")"});
  auto prompt = minimal_prompt(fx.schema, "q");
  auto transcript = run_session(backend, fx.tools, prompt);
  CHECK(transcript.finish == FinishReason::Done);
  REQUIRE(transcript.turns.size() == 2);
  CHECK(transcript.turns[0].observation.rfind("Error: ParseFailure", 0) == 0);
  CHECK(*transcript.final_sql == "SELECT 2");
}

TEST_CASE("history fidelity: every prior turn appears verbatim in order") {
  ToolsetFixture fx;
  ScriptedBackend backend({
      "Thought: one\nAction: ExecuteSQL(\"SELECT 1\")",
      "Thought: two\nAction: SearchValue(\"prague\")",
      "Thought: three\nAction: Done()",
  });
  auto prompt = minimal_prompt(fx.schema, "q");
  auto transcript = run_session(backend, fx.tools, prompt);

  auto text = serialize_history(prompt, transcript.turns);
  std::size_t cursor = 0;
  for (const auto& turn : transcript.turns) {
    auto p_thought = text.find("Thought: " + turn.thought, cursor);
    REQUIRE(p_thought != std::string::npos);
    auto p_action = text.find("Action: " + turn.action_text, p_thought);
    REQUIRE(p_action != std::string::npos);
    cursor = p_action;
    if (!turn.observation.empty()) {
      auto p_obs = text.find("Observation: " + turn.observation, p_action);
      REQUIRE(p_obs != std::string::npos);
      cursor = p_obs;
    }
  }
}

TEST_CASE("determinism: identical transcripts across scripted runs") {
  ToolsetFixture fx;
  auto prompt = minimal_prompt(fx.schema, "q");
  std::vector<std::string> script{
      "Thought: a\nAction: SearchColumn(\"region\")",
      "Thought: b\nAction: ExecuteSQL(\"SELECT COUNT(*) FROM loan\")",
      "Thought: c\nAction: Done()",
  };
  ScriptedBackend b1(script);
  ScriptedBackend b2(script);
  auto t1 = run_session(b1, fx.tools, prompt);
  auto t2 = run_session(b2, fx.tools, prompt);
  CHECK(transcript_to_json(t1).dump() == transcript_to_json(t2).dump());
}

TEST_CASE("termination property under a random-garbage backend") {
  ToolsetFixture fx;
  auto prompt = minimal_prompt(fx.schema, "q");

  std::mt19937 rng(7);
  const std::vector<std::string> fragments{
      "Action: SearchColumn(\"x\")",
      "Action: Done(",
      "Thought: ???",
      "Action: ExecuteSQL(\"SELECT * FROM nowhere\")",
      "Action: Unknown(\"y\")",
      ")(*&^%$",
      "Action: FindShortestPath(\"a.b\")",
      "",
  };
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> outputs;
    for (int i = 0; i < 20; ++i)
      outputs.push_back(fragments[rng() % fragments.size()]);
    ScriptedBackend backend(outputs);
    auto transcript = run_session(backend, fx.tools, prompt, {}, 8);
    CHECK(transcript.turns.size() <= 8);
    // every parsed action stayed within the closed five-action set
    for (const auto& turn : transcript.turns)
      if (turn.action.has_value())
        CHECK(static_cast<int>(turn.action->kind) >= 0);
  }
}

// ---------------------------------------------------------------------------
// Persistence + replay

TEST_CASE("transcript persists and replays byte-identically") {
  ToolsetFixture fx;
  auto prompt = minimal_prompt(fx.schema, "how many loans?");
  ScriptedBackend backend({
      "Thought: count\nAction: ExecuteSQL(\"SELECT COUNT(*) FROM loan\")",
      "Thought: done\nAction: Done()",
  });
  auto transcript = run_session(backend, fx.tools, prompt);
  auto path = fx.tmp.file("session.json");
  save_transcript(transcript, path);

  auto script = load_replay_script(path);
  ScriptedBackend replay(script);
  auto replayed = run_session(replay, fx.tools, prompt);
  CHECK(transcript_to_json(replayed).dump() ==
        transcript_to_json(transcript).dump());
}

TEST_CASE("exemplar files load as demonstrations") {
  auto demos = load_exemplar_dir(std::string(ITSQL_REPO_DIR) +
                                 "/data/exemplars/spider");
  REQUIRE(demos.size() == 2);
  CHECK(demos[0].schema_text.rfind("Schema:", 0) == 0);
  REQUIRE(demos[0].exemplars.size() == 1);
  CHECK(demos[0].exemplars[0].find("Action: Done(") != std::string::npos);
}

TEST_CASE("default decoding config matches the shipped inference settings") {
  DecodingConfig config;
  CHECK(config.temperature == 0.7);
  CHECK(config.top_p == 0.95);
  CHECK(config.n == 3);
  CHECK(config.max_tokens == 384);
  CHECK(config.stop ==
        std::vector<std::string>{"\nObservation", "\nThought", "[END]"});
}
