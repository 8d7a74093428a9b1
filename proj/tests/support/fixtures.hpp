// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shared test fixtures: temp-dir management and SQLite databases built from
// inline DDL so every test starts from a known state.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "itsql/sqlite.hpp"

namespace itsql::test {

/// Unique temp directory, removed on destruction.
class TempDir {
 public:
  TempDir() {
    auto base = std::filesystem::temp_directory_path();
    std::mt19937_64 rng(std::random_device{}());
    path_ = base / ("itsql-test-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const {
    return (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

inline void make_db(const std::string& path, const std::string& ddl) {
  auto db = itsql::open_readwrite(path);
  itsql::exec(db.get(), ddl);
}

/// Two-table schema used across the introspection and graph tests:
/// A(id, name), B(id, a_id FK->A.id).
inline const char* kToyAbDdl = R"sql(
CREATE TABLE A (id INTEGER PRIMARY KEY, name TEXT);
CREATE TABLE B (id INTEGER PRIMARY KEY, a_id INTEGER REFERENCES A(id));
INSERT INTO A VALUES (1, 'Alice'), (2, 'Bob');
INSERT INTO B VALUES (10, 1), (11, 2);
)sql";

/// Banking-flavored toy database: three tables, two FK hops, text values for
/// BM25 and enough rows for aggregate queries. Also shipped as
/// data/fixtures/toy_bank.sql for the CLI and the golden replay.
inline const char* kToyBankDdl = R"sql(
CREATE TABLE district (
  district_id INTEGER PRIMARY KEY,
  name TEXT,
  region TEXT
);
CREATE TABLE account (
  account_id INTEGER PRIMARY KEY,
  district_id INTEGER REFERENCES district(district_id),
  open_date DATE
);
CREATE TABLE loan (
  loan_id INTEGER PRIMARY KEY,
  account_id INTEGER REFERENCES account(account_id),
  amount REAL
);
INSERT INTO district VALUES
  (1, 'Hlavni mesto Praha', 'Prague'),
  (2, 'Liberec', 'North Bohemia'),
  (3, 'Usti nad Labem', 'North Bohemia'),
  (4, 'Brno - mesto', 'South Moravia');
INSERT INTO account VALUES
  (101, 1, '1995-03-24'),
  (102, 2, '1996-07-01'),
  (103, 2, '1997-01-15'),
  (104, 3, '1998-11-30'),
  (105, 4, '1999-05-06');
INSERT INTO loan VALUES
  (201, 101, 5000.0),
  (202, 102, 12000.5),
  (203, 104, 7250.25);
)sql";

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::string out((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  return out;
}

/// FNV-1a over the raw file bytes; the read-only-sandbox checks compare this.
inline unsigned long long file_hash(const std::string& path) {
  std::string bytes = read_file(path);
  unsigned long long h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace itsql::test
