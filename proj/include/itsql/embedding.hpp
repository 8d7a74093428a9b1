// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "itsql/error.hpp"

namespace itsql {

/// Turns a batch of texts into equal-dimension real vectors.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<std::vector<double>> embed(
      const std::vector<std::string>& texts) = 0;
  virtual std::size_t dimension() const = 0;
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace detail

/// Deterministic offline embedder: lowercase character 3-grams hashed into a
/// fixed-dimension space, sublinear TF with batch-level IDF, L2-normalized.
/// No network, stable across platforms (FNV-1a hashing).
class OfflineNgramEmbedder : public EmbeddingProvider {
 public:
  explicit OfflineNgramEmbedder(std::size_t dimension = 4096)
      : dimension_(dimension) {}

  std::size_t dimension() const override { return dimension_; }

  std::vector<std::vector<double>> embed(
      const std::vector<std::string>& texts) override {
    std::vector<std::map<std::size_t, double>> tf(texts.size());
    std::map<std::size_t, int> df;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      std::string t = lowercase(texts[i]);
      for (std::size_t j = 0; j + 3 <= t.size(); ++j) {
        std::size_t bucket = detail::fnv1a(t.substr(j, 3)) % dimension_;
        tf[i][bucket] += 1.0;
      }
      for (const auto& [bucket, _] : tf[i]) df[bucket] += 1;
    }
    const double n = static_cast<double>(texts.size());
    std::vector<std::vector<double>> out(texts.size(),
                                         std::vector<double>(dimension_, 0.0));
    for (std::size_t i = 0; i < texts.size(); ++i) {
      double norm_sq = 0.0;
      for (const auto& [bucket, count] : tf[i]) {
        double idf = std::log((1.0 + n) / (1.0 + df[bucket])) + 1.0;
        double w = (1.0 + std::log(count)) * idf;
        out[i][bucket] = w;
        norm_sq += w * w;
      }
      if (norm_sq > 0.0) {
        double inv = 1.0 / std::sqrt(norm_sq);
        for (double& v : out[i]) v *= inv;
      }
    }
    return out;
  }

 private:
  static std::string lowercase(std::string s) {
    for (char& c : s)
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return s;
  }

  std::size_t dimension_;
};

inline double cosine_similarity(const std::vector<double>& a,
                                const std::vector<double>& b) {
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace itsql
