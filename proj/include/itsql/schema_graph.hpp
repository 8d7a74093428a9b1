// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <deque>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "itsql/error.hpp"
#include "itsql/schema.hpp"

namespace itsql {

/// Node ids use `{column name}.{table name}`.
inline std::string make_node_id(const std::string& column,
                                const std::string& table) {
  return column + "." + table;
}

struct SchemaGraph {
  struct Node {
    std::string id;
    std::string table;
    std::string column;
  };
  struct Edge {
    int to = 0;
    int weight = 0;      // 0 intra-table, 1 foreign key
    int fk_index = -1;   // index into fks for weight-1 edges
  };

  std::vector<Node> nodes;
  std::vector<std::vector<Edge>> adjacency;
  std::vector<ForeignKey> fks;
  std::map<std::string, int> id_to_node;  // exact id, case-insensitive key

  int node_of(const std::string& id) const {
    auto it = id_to_node.find(lower(id));
    return it == id_to_node.end() ? -1 : it->second;
  }
};

struct JoinPath {
  std::vector<std::string> nodes;
  int join_count = 0;
  std::string rendered;
};

inline SchemaGraph build_schema_graph(const DatabaseSchema& schema) {
  SchemaGraph graph;
  std::map<std::string, std::vector<int>> by_table;
  for (const auto& table : schema.tables) {
    for (const auto& col : table.columns) {
      int idx = static_cast<int>(graph.nodes.size());
      graph.nodes.push_back({make_node_id(col.name, table.name), table.name,
                             col.name});
      graph.id_to_node[lower(graph.nodes.back().id)] = idx;
      by_table[lower(table.name)].push_back(idx);
    }
  }
  graph.adjacency.resize(graph.nodes.size());

  // intra-table clique at weight 0
  for (const auto& [_, members] : by_table) {
    for (std::size_t i = 0; i < members.size(); ++i)
      for (std::size_t j = 0; j < members.size(); ++j)
        if (i != j) graph.adjacency[members[i]].push_back({members[j], 0, -1});
  }

  for (const auto& fk : schema.relations) {
    int a = graph.node_of(make_node_id(fk.from_column, fk.from_table));
    int b = graph.node_of(make_node_id(fk.to_column, fk.to_table));
    if (a < 0 || b < 0) continue;  // schema invariants already rejected these
    int fk_idx = static_cast<int>(graph.fks.size());
    graph.fks.push_back(fk);
    graph.adjacency[a].push_back({b, 1, fk_idx});
    graph.adjacency[b].push_back({a, 1, fk_idx});
  }
  return graph;
}

namespace detail {

inline int edit_distance(const std::string& a, const std::string& b) {
  std::vector<int> prev(b.size() + 1);
  std::vector<int> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline std::string nearest_node_id(const SchemaGraph& graph,
                                   const std::string& id) {
  int best = std::numeric_limits<int>::max();
  std::string best_id;
  std::string needle = lower(id);
  for (const auto& node : graph.nodes) {
    int d = edit_distance(needle, lower(node.id));
    if (d < best || (d == best && node.id < best_id)) {
      best = d;
      best_id = node.id;
    }
  }
  return best_id;
}

/// 0-1 BFS distances from a source over the 0/1-weighted graph.
inline std::vector<int> zero_one_bfs(const SchemaGraph& graph, int source) {
  std::vector<int> dist(graph.nodes.size(), std::numeric_limits<int>::max());
  std::deque<int> queue;
  dist[source] = 0;
  queue.push_back(source);
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    for (const auto& e : graph.adjacency[u]) {
      int nd = dist[u] + e.weight;
      if (nd < dist[e.to]) {
        dist[e.to] = nd;
        if (e.weight == 0)
          queue.push_front(e.to);
        else
          queue.push_back(e.to);
      }
    }
  }
  return dist;
}

}  // namespace detail

/// Resolves a user-supplied node id. Accepts the canonical
/// `{column}.{table}` form; also accepts `{table}.{column}` when that parse
/// is unambiguous. Throws UnknownNode (with a nearest-id suggestion) or
/// AmbiguousNode.
inline std::string resolve_node_id(const SchemaGraph& graph,
                                   const std::string& raw) {
  auto dot = raw.find('.');
  if (dot == std::string::npos || graph.nodes.empty())
    throw Error("UnknownNode",
                "'" + raw + "' is not in {column}.{table} format");
  std::string first = raw.substr(0, dot);
  std::string second = raw.substr(dot + 1);

  int canonical = graph.node_of(make_node_id(first, second));
  int swapped = graph.node_of(make_node_id(second, first));
  if (canonical >= 0 && swapped >= 0 && canonical != swapped)
    throw Error("AmbiguousNode",
                "'" + raw + "' matches both " + graph.nodes[canonical].id +
                    " and " + graph.nodes[swapped].id +
                    "; use {column}.{table}");
  if (canonical >= 0) return graph.nodes[canonical].id;
  if (swapped >= 0) return graph.nodes[swapped].id;
  throw Error("UnknownNode", "'" + raw + "' not found; did you mean '" +
                                 detail::nearest_node_id(graph, raw) + "'?");
}

namespace detail {

/// Lexicographically-smallest minimal-join path: DFS over dist-feasible moves
/// (w + dist_end(v) == dist_end(u)) with neighbors in node-id order. The first
/// complete simple path found is the answer.
inline bool lex_path_dfs(const SchemaGraph& graph,
                         const std::vector<int>& dist_to_end, int u, int target,
                         std::vector<char>& visited, std::vector<int>& path,
                         std::vector<int>& fk_trail) {
  if (u == target) return true;
  std::vector<const SchemaGraph::Edge*> candidates;
  for (const auto& e : graph.adjacency[u]) {
    if (visited[e.to] != 0) continue;
    if (dist_to_end[e.to] == std::numeric_limits<int>::max()) continue;
    if (e.weight + dist_to_end[e.to] != dist_to_end[u]) continue;
    candidates.push_back(&e);
  }
  std::sort(candidates.begin(), candidates.end(),
            [&](const SchemaGraph::Edge* a, const SchemaGraph::Edge* b) {
              return graph.nodes[a->to].id < graph.nodes[b->to].id;
            });
  for (const auto* e : candidates) {
    visited[e->to] = 1;
    path.push_back(e->to);
    fk_trail.push_back(e->fk_index);
    if (lex_path_dfs(graph, dist_to_end, e->to, target, visited, path,
                     fk_trail))
      return true;
    visited[e->to] = 0;
    path.pop_back();
    fk_trail.pop_back();
  }
  return false;
}

}  // namespace detail

/// Renders the FK chain as `A JOIN B ON A.x = B.y JOIN C ON ...`; consecutive
/// intra-table hops collapse (no self-joins emitted). A path with no FK edge
/// renders as the bare table name.
inline std::string render_join_path(const SchemaGraph& graph,
                                    const std::vector<int>& node_path,
                                    const std::vector<int>& fk_trail) {
  if (node_path.empty()) return "";
  std::string out = graph.nodes[node_path.front()].table;
  std::string current_table = graph.nodes[node_path.front()].table;
  for (std::size_t i = 0; i < fk_trail.size(); ++i) {
    if (fk_trail[i] < 0) continue;  // intra-table hop
    const ForeignKey& fk = graph.fks[fk_trail[i]];
    const std::string& next_table = graph.nodes[node_path[i + 1]].table;
    // orient the ON clause so the already-joined side comes first
    std::string lhs_table = fk.from_table;
    std::string lhs_col = fk.from_column;
    std::string rhs_table = fk.to_table;
    std::string rhs_col = fk.to_column;
    if (lower(lhs_table) != lower(current_table)) {
      std::swap(lhs_table, rhs_table);
      std::swap(lhs_col, rhs_col);
    }
    out += " JOIN " + next_table + " ON " + lhs_table + "." + lhs_col + " = " +
           rhs_table + "." + rhs_col;
    current_table = next_table;
  }
  return out;
}

/// Minimal-join path between two columns. join_count counts FK edges only;
/// intra-table moves are free. Among minimal paths the lexicographically
/// smallest node-id sequence wins.
inline JoinPath find_shortest_path(const SchemaGraph& graph,
                                   const std::string& start,
                                   const std::string& end) {
  std::string start_id = resolve_node_id(graph, start);
  std::string end_id = resolve_node_id(graph, end);
  int s = graph.node_of(start_id);
  int t = graph.node_of(end_id);

  auto dist_to_end = detail::zero_one_bfs(graph, t);
  if (dist_to_end[s] == std::numeric_limits<int>::max())
    throw Error("NoPath", "no join path between tables " +
                              graph.nodes[s].table + " and " +
                              graph.nodes[t].table +
                              " (disconnected schema components)");

  std::vector<char> visited(graph.nodes.size(), 0);
  std::vector<int> node_path{s};
  std::vector<int> fk_trail;
  visited[s] = 1;
  detail::lex_path_dfs(graph, dist_to_end, s, t, visited, node_path, fk_trail);

  JoinPath result;
  result.join_count = dist_to_end[s];
  for (int idx : node_path) result.nodes.push_back(graph.nodes[idx].id);
  result.rendered = render_join_path(graph, node_path, fk_trail);
  return result;
}

}  // namespace itsql
