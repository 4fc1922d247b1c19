#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "graphsearch/kb.hpp"
#include "graphsearch/kb_store.hpp"
#include "graphsearch/text.hpp"

namespace graphsearch {

class LlmClient;

struct Document {
  std::string doc_id;
  std::string title;
  std::string body;
};

/// One document per line: {"doc_id": ..., "title": ..., "body": ...}.
std::vector<Document> parse_corpus(std::string_view jsonl);
std::vector<Document> load_corpus(const std::filesystem::path& path);

using UnitFunction = std::function<std::vector<text::UnitSpan>(std::string_view)>;

struct ChunkingOptions {
  std::size_t size_units = 400;
  std::size_t overlap_units = 0;
  UnitFunction units = text::whitespace_units;
  std::string unit_name = "whitespace-word";
};

struct DocumentChunk {
  std::string doc_id;
  std::size_t ordinal = 0;
  std::string text;
  std::size_t unit_begin = 0;  // half-open unit range within the document
  std::size_t unit_end = 0;

  std::size_t unit_count() const noexcept { return unit_end - unit_begin; }
};

/// Fixed-size windows advancing by size - overlap units. Chunk text is the
/// document slice from the first unit's start to the last unit's end.
std::vector<DocumentChunk> chunk_document(const Document& doc, const ChunkingOptions& options);

struct RelationCandidate {
  std::string head;
  std::string tail;
  Properties properties;
  std::string description;

  friend bool operator==(const RelationCandidate&, const RelationCandidate&) = default;
};

/// Entity candidates carry no source chunks; the indexer attaches them.
struct ExtractionResult {
  std::vector<EntityCandidate> entities;
  std::vector<RelationCandidate> relations;

  bool empty() const noexcept { return entities.empty() && relations.empty(); }
};

struct ExtractionOutcome {
  ExtractionResult result;
  std::vector<std::string> warnings;
  bool failed = false;
};

/// Implementations must be callable from several threads at once.
class Extractor {
 public:
  virtual ~Extractor() = default;
  virtual std::string identity() const = 0;
  virtual ExtractionOutcome extract(const Chunk& chunk) = 0;
};

/// Deterministic pattern extractor. Entities are runs of capitalized words
/// within a sentence ("of"-style particles may join two capitalized words);
/// a leading sentence-initial function word is dropped. Two consecutive
/// entities in a sentence form a relation head -> tail when the words
/// between them contain a connective verb; the predicate words become the
/// "predicate" property and the sentence the description.
class RuleBasedExtractor final : public Extractor {
 public:
  std::string identity() const override { return "rule-based/1"; }
  ExtractionOutcome extract(const Chunk& chunk) override;
};

/// Parses the line grammar emitted by the extract template:
///   E|name|k=v;k=v|description
///   R|head|tail|k=v;k=v|description
/// Returns false and fills `error` on the first malformed line.
bool parse_extraction_records(std::string_view response, ExtractionResult& out, std::string& error);

/// LLM-backed extractor. Unparseable responses are retried up to
/// `attempts` times, then reported as a failed (empty) extraction.
class LlmExtractor final : public Extractor {
 public:
  LlmExtractor(LlmClient& llm, int attempts = 2) : llm_(llm), attempts_(attempts < 1 ? 1 : attempts) {}

  std::string identity() const override;
  ExtractionOutcome extract(const Chunk& chunk) override;

 private:
  LlmClient& llm_;
  int attempts_;
};

struct BuildConfig {
  ChunkingOptions chunking;
  KbOptions kb;
  std::size_t parallelism = 1;
};

struct ExtractionFailure {
  ChunkId chunk;
  std::string message;
};

struct BuildReport {
  std::string extractor;
  std::size_t documents = 0;
  std::size_t chunks = 0;
  std::size_t entity_candidates = 0;
  std::size_t entities = 0;
  std::size_t merged_entities = 0;
  std::size_t relation_candidates = 0;
  std::size_t relations = 0;
  std::size_t dropped_relations = 0;
  std::size_t self_loops = 0;
  std::vector<ExtractionFailure> failures;
  std::vector<std::string> warnings;
};

nlohmann::json to_json(const BuildReport& report);

struct BuildResult {
  GraphKB kb;
  BuildReport report;
  std::vector<DocumentSummary> documents;
};

/// Chunks every document, extracts (concurrently up to
/// config.parallelism) and aggregates in chunk order, so the store does not
/// depend on extraction completion order. Throws BuildError naming the
/// document when chunking fails.
BuildResult build_index(std::span<const Document> corpus, const BuildConfig& config, Extractor& extractor);

}  // namespace graphsearch
