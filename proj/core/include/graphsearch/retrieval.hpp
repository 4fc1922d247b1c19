#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "graphsearch/embedding.hpp"
#include "graphsearch/kb.hpp"
#include "graphsearch/vector_index.hpp"

namespace graphsearch {

enum class RetrievalMode { semantic, relational, hybrid };

std::string_view to_string(RetrievalMode mode);
RetrievalMode retrieval_mode_from_string(std::string_view name);

struct RetrieverConfig {
  std::size_t top_k = 30;
  RetrievalMode mode = RetrievalMode::hybrid;
  std::size_t hop_expansion = 1;
  double hop_decay = 0.5;
};

struct ScoredChunk {
  Chunk chunk;
  double score = 0.0;
  friend bool operator==(const ScoredChunk&, const ScoredChunk&) = default;
};

struct ScoredEntity {
  Entity entity;
  double score = 0.0;
  friend bool operator==(const ScoredEntity&, const ScoredEntity&) = default;
};

struct ScoredRelation {
  Relation relation;
  std::string head_name;
  std::string tail_name;
  double score = 0.0;
  friend bool operator==(const ScoredRelation&, const ScoredRelation&) = default;
};

/// C = {E_q, R_q, K_q}. Each list is sorted by descending score, then
/// ascending id, with no duplicate ids.
struct RetrievedContext {
  std::vector<ScoredEntity> entities;
  std::vector<ScoredRelation> relations;
  std::vector<ScoredChunk> chunks;

  bool empty() const noexcept { return entities.empty() && relations.empty() && chunks.empty(); }
  std::size_t size() const noexcept { return entities.size() + relations.size() + chunks.size(); }

  friend bool operator==(const RetrievedContext&, const RetrievedContext&) = default;
};

/// Per-list union by id keeping the higher score, re-sorted.
RetrievedContext merge_contexts(const RetrievedContext& a, const RetrievedContext& b);

/// Embedding text for graph elements.
std::string entity_embedding_text(const Entity& e);
std::string relation_embedding_text(const GraphKB& kb, const Relation& r);

/// Graph KB retriever abstraction.
class Retriever {
 public:
  virtual ~Retriever() = default;
  virtual RetrievedContext retrieve(const std::string& query, RetrievalMode mode, std::size_t k) = 0;
};

inline constexpr const char* kChunkEmbeddingsFile = "chunks.emb";
inline constexpr const char* kEntityEmbeddingsFile = "entities.emb";
inline constexpr const char* kRelationEmbeddingsFile = "relations.emb";

/// Built-in dual-level retriever over a frozen GraphKB: flat cosine search
/// over chunks (semantic channel) and over entities and relations
/// (relational channel) with hop expansion. Holds a reference to `kb`.
class GraphRetriever final : public Retriever {
 public:
  /// Embeds every chunk, entity and relation of `kb`.
  GraphRetriever(const GraphKB& kb, std::shared_ptr<EmbeddingProvider> embedder, RetrieverConfig config = {});

  /// Uses precomputed embedding sidecars; row counts must match the store.
  GraphRetriever(const GraphKB& kb, std::shared_ptr<EmbeddingProvider> embedder, RetrieverConfig config,
                 FlatIndex chunk_index, FlatIndex entity_index, FlatIndex relation_index);

  static GraphRetriever load(const GraphKB& kb, std::shared_ptr<EmbeddingProvider> embedder, RetrieverConfig config,
                             const std::filesystem::path& dir);
  void save_sidecars(const std::filesystem::path& dir) const;

  RetrievedContext semantic_retrieve(const std::string& query, std::size_t k) const;
  RetrievedContext relational_retrieve(const std::string& query, std::size_t k, std::size_t hop_expansion) const;
  RetrievedContext hybrid_retrieve(const std::string& query, std::size_t k) const;

  RetrievedContext retrieve(const std::string& query, RetrievalMode mode, std::size_t k) override;

  const RetrieverConfig& config() const noexcept { return config_; }
  const GraphKB& kb() const noexcept { return kb_; }
  EmbeddingProvider& embedder() const noexcept { return *embedder_; }
  const FlatIndex& chunk_index() const noexcept { return chunk_index_; }
  const FlatIndex& entity_index() const noexcept { return entity_index_; }
  const FlatIndex& relation_index() const noexcept { return relation_index_; }

 private:
  RetrievedContext semantic_for(const Embedding& q, std::size_t k) const;
  RetrievedContext relational_for(const Embedding& q, std::size_t k, std::size_t hop_expansion) const;
  ScoredRelation scored_relation(RelationId id, double score) const;

  const GraphKB& kb_;
  std::shared_ptr<EmbeddingProvider> embedder_;
  RetrieverConfig config_;
  FlatIndex chunk_index_;
  FlatIndex entity_index_;
  FlatIndex relation_index_;
};

}  // namespace graphsearch
