#include "graphsearch/vector_index.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "graphsearch/errors.hpp"

namespace graphsearch {
namespace {

static_assert(std::endian::native == std::endian::little, "sidecar I/O assumes a little-endian host");

constexpr std::array<char, 8> kMagic = {'G', 'S', 'E', 'M', 'B', '0', '0', '1'};

double norm_of(std::span<const float> v) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(sq);
}

bool ranks_before(const SearchHit& a, const SearchHit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.row < b.row;
}

}  // namespace

void FlatIndex::add(std::span<const float> vector) {
  if (vector.size() != dimension_) {
    throw InvalidArgument("vector of dimension " + std::to_string(vector.size()) + " added to index of dimension " +
                          std::to_string(dimension_));
  }
  data_.insert(data_.end(), vector.begin(), vector.end());
  norms_.push_back(norm_of(vector));
}

std::span<const float> FlatIndex::row(std::size_t i) const {
  if (i >= size()) throw NotFound("row " + std::to_string(i) + " out of range");
  return std::span<const float>(data_).subspan(i * dimension_, dimension_);
}

double FlatIndex::score(std::span<const float> query, std::size_t i) const {
  if (query.size() != dimension_) throw InvalidArgument("query dimension mismatch");
  const double qn = norm_of(query);
  const double rn = norms_.at(i);
  if (qn == 0.0 || rn == 0.0) return 0.0;
  const float* r = data_.data() + i * dimension_;
  double dot = 0.0;
  for (std::size_t d = 0; d < dimension_; ++d) dot += static_cast<double>(query[d]) * static_cast<double>(r[d]);
  return dot / (qn * rn);
}

std::vector<SearchHit> FlatIndex::search(std::span<const float> query, std::size_t k) const {
  if (query.size() != dimension_) throw InvalidArgument("query dimension mismatch");
  std::vector<SearchHit> hits;
  if (k == 0 || size() == 0) return hits;
  const double qn = norm_of(query);
  hits.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) {
    double s = 0.0;
    if (qn != 0.0 && norms_[i] != 0.0) {
      const float* r = data_.data() + i * dimension_;
      double dot = 0.0;
      for (std::size_t d = 0; d < dimension_; ++d) dot += static_cast<double>(query[d]) * static_cast<double>(r[d]);
      s = dot / (qn * norms_[i]);
    }
    hits.push_back(SearchHit{i, s});
  }
  const std::size_t keep = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), ranks_before);
  hits.resize(keep);
  return hits;
}

void FlatIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StoreError(path.filename().string(), "cannot open file for writing");
  const auto dim = static_cast<std::uint32_t>(dimension_);
  const auto rows = static_cast<std::uint64_t>(size());
  out.write(kMagic.data(), kMagic.size());
  out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
  out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
  out.write(reinterpret_cast<const char*>(data_.data()), static_cast<std::streamsize>(data_.size() * sizeof(float)));
  if (!out) throw StoreError(path.filename().string(), "write failed");
}

FlatIndex FlatIndex::load(const std::filesystem::path& path) {
  const std::string name = path.filename().string();
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw StoreError(name, "cannot open file");
  const auto file_size = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0);
  constexpr std::uint64_t header = kMagic.size() + sizeof(std::uint32_t) + sizeof(std::uint64_t);
  if (file_size < header) throw StoreError(name, "truncated header");
  std::array<char, 8> magic{};
  std::uint32_t dim = 0;
  std::uint64_t rows = 0;
  in.read(magic.data(), magic.size());
  in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
  in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
  if (magic != kMagic) throw StoreError(name, "bad magic or unsupported sidecar version");
  if (dim == 0) throw StoreError(name, "zero dimension");
  if (rows > (file_size - header) / (static_cast<std::uint64_t>(dim) * sizeof(float)) ||
      file_size != header + rows * dim * sizeof(float)) {
    throw StoreError(name, "size does not match " + std::to_string(rows) + " rows of dimension " + std::to_string(dim));
  }
  FlatIndex index(dim);
  std::vector<float> row(dim);
  for (std::uint64_t r = 0; r < rows; ++r) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(dim * sizeof(float)));
    if (!in) throw StoreError(name, "read failed");
    index.add(row);
  }
  return index;
}

}  // namespace graphsearch
