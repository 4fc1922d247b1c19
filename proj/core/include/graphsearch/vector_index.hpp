#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace graphsearch {

struct SearchHit {
  std::size_t row = 0;
  double score = 0.0;

  friend bool operator==(const SearchHit&, const SearchHit&) = default;
};

/// Exact (brute-force) cosine index over fixed-dimension float rows.
class FlatIndex {
 public:
  explicit FlatIndex(std::size_t dimension = 0) : dimension_(dimension) {}

  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return norms_.size(); }

  void add(std::span<const float> vector);
  std::span<const float> row(std::size_t i) const;

  /// Cosine similarity in double precision; 0 when either vector is zero.
  double score(std::span<const float> query, std::size_t row) const;

  /// Top-k rows by descending cosine, ties broken by ascending row.
  std::vector<SearchHit> search(std::span<const float> query, std::size_t k) const;

  /// Binary sidecar: "GSEMB001", u32 dimension, u64 rows, rows x dimension
  /// float32, all little-endian.
  void save(const std::filesystem::path& path) const;
  static FlatIndex load(const std::filesystem::path& path);

  friend bool operator==(const FlatIndex& a, const FlatIndex& b) {
    return a.dimension_ == b.dimension_ && a.data_ == b.data_;
  }

 private:
  std::size_t dimension_;
  std::vector<float> data_;
  std::vector<double> norms_;
};

}  // namespace graphsearch
