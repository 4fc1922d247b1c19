#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "graphsearch/kb.hpp"

namespace graphsearch {

inline constexpr int kStoreFormatVersion = 1;

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kChunksFile = "chunks.jsonl";
inline constexpr const char* kEntitiesFile = "entities.jsonl";
inline constexpr const char* kRelationsFile = "relations.jsonl";

struct DocumentSummary {
  std::string doc_id;
  std::size_t chunks = 0;

  friend bool operator==(const DocumentSummary&, const DocumentSummary&) = default;
};

/// Index-directory manifest. Counts are filled in by save_kb.
struct Manifest {
  int format_version = kStoreFormatVersion;
  std::size_t chunk_size_units = 400;
  std::size_t chunk_overlap_units = 0;
  std::string chunk_unit = "whitespace-word";
  std::string extractor;
  std::string embedder;
  std::size_t embedding_dimension = 0;
  std::vector<DocumentSummary> documents;
  std::size_t chunk_count = 0;
  std::size_t entity_count = 0;
  std::size_t relation_count = 0;
  std::size_t max_description_chars = 2048;

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

enum class KbTable { chunks, entities, relations };

/// Deterministic line-delimited serialization of one table.
std::string serialize_table(const GraphKB& kb, KbTable table);
std::string serialize_manifest(const Manifest& manifest);

/// Writes manifest + three record files into `dir` (created if absent).
void save_kb(const GraphKB& kb, const std::filesystem::path& dir, Manifest manifest = {});

struct LoadedKb {
  GraphKB kb;
  Manifest manifest;
};

/// Throws StoreError naming the offending file on missing, truncated,
/// corrupt or version-mismatched input.
LoadedKb load_kb(const std::filesystem::path& dir);
Manifest load_manifest(const std::filesystem::path& dir);

}  // namespace graphsearch
