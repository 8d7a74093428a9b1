// SPDX-License-Identifier: Apache-2.0
#pragma once

// Lightweight SQL tokenizer: string-aware and comment-aware, not a grammar.
// Feeds the CVR/CVCR/join-count statistics; unparseable residue is counted
// by the callers, never silently dropped.

#include <cctype>
#include <string>
#include <vector>

namespace itsql {

enum class SqlTokenType { Word, String, Number, Operator, Punct };

struct SqlToken {
  SqlTokenType type;
  std::string text;  // Word lowercased; String without quotes
};

inline std::vector<SqlToken> tokenize_sql(const std::string& sql) {
  std::vector<SqlToken> tokens;
  std::size_t i = 0;
  const std::size_t n = sql.size();
  while (i < n) {
    char c = sql[i];
    if (std::isspace(static_cast<unsigned char>(c)) != 0) {
      ++i;
      continue;
    }
    // comments
    if (c == '-' && i + 1 < n && sql[i + 1] == '-') {
      while (i < n && sql[i] != '\n') ++i;
      continue;
    }
    if (c == '/' && i + 1 < n && sql[i + 1] == '*') {
      i += 2;
      while (i + 1 < n && !(sql[i] == '*' && sql[i + 1] == '/')) ++i;
      i = (i + 1 < n) ? i + 2 : n;
      continue;
    }
    // string literals: single quotes always, double quotes kept as String
    // too since benchmark SQL frequently uses them for values
    if (c == '\'' || c == '"') {
      char quote = c;
      std::string value;
      ++i;
      while (i < n) {
        if (sql[i] == quote) {
          if (i + 1 < n && sql[i + 1] == quote) {  // doubled-quote escape
            value += quote;
            i += 2;
            continue;
          }
          break;
        }
        value += sql[i++];
      }
      if (i < n) ++i;  // closing quote
      tokens.push_back({SqlTokenType::String, value});
      continue;
    }
    if (c == '`' || c == '[') {
      char close = c == '`' ? '`' : ']';
      std::string value;
      ++i;
      while (i < n && sql[i] != close) value += sql[i++];
      if (i < n) ++i;
      for (char& ch : value)
        ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      tokens.push_back({SqlTokenType::Word, value});
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) != 0 ||
        (c == '.' && i + 1 < n &&
         std::isdigit(static_cast<unsigned char>(sql[i + 1])) != 0)) {
      std::string value;
      while (i < n && (std::isdigit(static_cast<unsigned char>(sql[i])) != 0 ||
                       sql[i] == '.' || sql[i] == 'e' || sql[i] == 'E' ||
                       ((sql[i] == '+' || sql[i] == '-') && !value.empty() &&
                        (value.back() == 'e' || value.back() == 'E'))))
        value += sql[i++];
      tokens.push_back({SqlTokenType::Number, value});
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) != 0 || c == '_') {
      std::string value;
      while (i < n && (std::isalnum(static_cast<unsigned char>(sql[i])) != 0 ||
                       sql[i] == '_'))
        value += static_cast<char>(
            std::tolower(static_cast<unsigned char>(sql[i]))), ++i;
      tokens.push_back({SqlTokenType::Word, value});
      continue;
    }
    // multi-char comparison operators
    if (c == '<' || c == '>' || c == '!' || c == '=') {
      std::string op(1, c);
      if (i + 1 < n && (sql[i + 1] == '=' || (c == '<' && sql[i + 1] == '>')))
        op += sql[++i];
      ++i;
      tokens.push_back({SqlTokenType::Operator, op});
      continue;
    }
    tokens.push_back({SqlTokenType::Punct, std::string(1, c)});
    ++i;
  }
  return tokens;
}

}  // namespace itsql
