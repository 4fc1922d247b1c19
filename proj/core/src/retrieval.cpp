#include "graphsearch/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "graphsearch/errors.hpp"

namespace graphsearch {
namespace {

template <class Item, class IdOf>
void sort_items(std::vector<Item>& items, IdOf id_of) {
  std::sort(items.begin(), items.end(), [&](const Item& a, const Item& b) {
    if (a.score != b.score) return a.score > b.score;
    return id_of(a) < id_of(b);
  });
}

template <class Item, class IdOf>
std::vector<Item> merge_lists(const std::vector<Item>& a, const std::vector<Item>& b, IdOf id_of) {
  std::map<decltype(id_of(a.front())), const Item*> best;
  for (const auto* list : {&a, &b}) {
    for (const Item& item : *list) {
      auto [it, inserted] = best.try_emplace(id_of(item), &item);
      if (!inserted && item.score > it->second->score) it->second = &item;
    }
  }
  std::vector<Item> out;
  out.reserve(best.size());
  for (const auto& [id, item] : best) out.push_back(*item);
  sort_items(out, id_of);
  return out;
}

constexpr auto chunk_id_of = [](const ScoredChunk& c) { return c.chunk.id; };
constexpr auto entity_id_of = [](const ScoredEntity& e) { return e.entity.id; };
constexpr auto relation_id_of = [](const ScoredRelation& r) { return r.relation.id; };

FlatIndex embed_all(EmbeddingProvider& embedder, const std::vector<std::string>& texts) {
  FlatIndex index(embedder.dimension());
  constexpr std::size_t kBatch = 256;
  for (std::size_t i = 0; i < texts.size(); i += kBatch) {
    const auto n = std::min(kBatch, texts.size() - i);
    for (const auto& v : embedder.embed_batch(std::span<const std::string>(texts).subspan(i, n))) index.add(v);
  }
  return index;
}

}  // namespace

std::string_view to_string(RetrievalMode mode) {
  switch (mode) {
    case RetrievalMode::semantic: return "semantic";
    case RetrievalMode::relational: return "relational";
    case RetrievalMode::hybrid: return "hybrid";
  }
  return "hybrid";
}

RetrievalMode retrieval_mode_from_string(std::string_view name) {
  if (name == "semantic") return RetrievalMode::semantic;
  if (name == "relational") return RetrievalMode::relational;
  if (name == "hybrid") return RetrievalMode::hybrid;
  throw InvalidArgument("unknown retrieval mode '" + std::string(name) + "'");
}

RetrievedContext merge_contexts(const RetrievedContext& a, const RetrievedContext& b) {
  RetrievedContext out;
  out.entities = merge_lists(a.entities, b.entities, entity_id_of);
  out.relations = merge_lists(a.relations, b.relations, relation_id_of);
  out.chunks = merge_lists(a.chunks, b.chunks, chunk_id_of);
  return out;
}

std::string entity_embedding_text(const Entity& e) { return e.name + ": " + e.description; }

std::string relation_embedding_text(const GraphKB& kb, const Relation& r) {
  return kb.entity(r.head).name + " " + r.description + " " + kb.entity(r.tail).name;
}

GraphRetriever::GraphRetriever(const GraphKB& kb, std::shared_ptr<EmbeddingProvider> embedder, RetrieverConfig config)
    : kb_(kb), embedder_(std::move(embedder)), config_(config) {
  if (!embedder_) throw InvalidArgument("retriever needs an embedding provider");
  std::vector<std::string> texts;
  for (const Chunk& c : kb_.chunks()) texts.push_back(c.text);
  chunk_index_ = embed_all(*embedder_, texts);
  texts.clear();
  for (const Entity& e : kb_.entities()) texts.push_back(entity_embedding_text(e));
  entity_index_ = embed_all(*embedder_, texts);
  texts.clear();
  for (const Relation& r : kb_.relations()) texts.push_back(relation_embedding_text(kb_, r));
  relation_index_ = embed_all(*embedder_, texts);
}

GraphRetriever::GraphRetriever(const GraphKB& kb, std::shared_ptr<EmbeddingProvider> embedder, RetrieverConfig config,
                               FlatIndex chunk_index, FlatIndex entity_index, FlatIndex relation_index)
    : kb_(kb),
      embedder_(std::move(embedder)),
      config_(config),
      chunk_index_(std::move(chunk_index)),
      entity_index_(std::move(entity_index)),
      relation_index_(std::move(relation_index)) {
  if (!embedder_) throw InvalidArgument("retriever needs an embedding provider");
  const auto check = [&](const FlatIndex& idx, std::size_t rows, const char* file) {
    if (idx.size() != rows) {
      throw StoreError(file, "has " + std::to_string(idx.size()) + " rows, store has " + std::to_string(rows));
    }
    if (idx.dimension() != embedder_->dimension()) {
      throw StoreError(file, "dimension " + std::to_string(idx.dimension()) + " does not match embedder dimension " +
                                 std::to_string(embedder_->dimension()));
    }
  };
  check(chunk_index_, kb_.chunks().size(), kChunkEmbeddingsFile);
  check(entity_index_, kb_.entities().size(), kEntityEmbeddingsFile);
  check(relation_index_, kb_.relations().size(), kRelationEmbeddingsFile);
}

GraphRetriever GraphRetriever::load(const GraphKB& kb, std::shared_ptr<EmbeddingProvider> embedder, RetrieverConfig config,
                                    const std::filesystem::path& dir) {
  return GraphRetriever(kb, std::move(embedder), config, FlatIndex::load(dir / kChunkEmbeddingsFile),
                        FlatIndex::load(dir / kEntityEmbeddingsFile), FlatIndex::load(dir / kRelationEmbeddingsFile));
}

void GraphRetriever::save_sidecars(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  chunk_index_.save(dir / kChunkEmbeddingsFile);
  entity_index_.save(dir / kEntityEmbeddingsFile);
  relation_index_.save(dir / kRelationEmbeddingsFile);
}

ScoredRelation GraphRetriever::scored_relation(RelationId id, double score) const {
  const Relation& r = kb_.relation(id);
  return ScoredRelation{r, kb_.entity(r.head).name, kb_.entity(r.tail).name, score};
}

RetrievedContext GraphRetriever::semantic_for(const Embedding& q, std::size_t k) const {
  RetrievedContext ctx;
  for (const auto& hit : chunk_index_.search(q, k)) {
    ctx.chunks.push_back(ScoredChunk{kb_.chunks()[hit.row], hit.score});
  }
  return ctx;
}

RetrievedContext GraphRetriever::relational_for(const Embedding& q, std::size_t k, std::size_t hop_expansion) const {
  std::map<EntityId, double> entity_scores;
  std::map<RelationId, double> relation_scores;
  const auto seeds = entity_index_.search(q, k);
  for (const auto& hit : seeds) entity_scores[EntityId{hit.row}] = hit.score;
  for (const auto& hit : relation_index_.search(q, k)) relation_scores[RelationId{hit.row}] = hit.score;

  if (hop_expansion > 0) {
    const auto raise = [](auto& scores, auto id, double s) {
      auto [it, inserted] = scores.try_emplace(id, s);
      if (!inserted && s > it->second) it->second = s;
    };
    for (const auto& seed : seeds) {
      const Subgraph sg = kb_.neighbors(EntityId{seed.row}, hop_expansion);
      for (std::size_t i = 0; i < sg.entities.size(); ++i) {
        if (sg.entity_hops[i] == 0) continue;
        raise(entity_scores, sg.entities[i], seed.score * std::pow(config_.hop_decay, static_cast<double>(sg.entity_hops[i])));
      }
      for (std::size_t i = 0; i < sg.relations.size(); ++i) {
        raise(relation_scores, sg.relations[i],
              seed.score * std::pow(config_.hop_decay, static_cast<double>(sg.relation_hops[i])));
      }
    }
  }

  RetrievedContext ctx;
  for (const auto& [id, s] : entity_scores) ctx.entities.push_back(ScoredEntity{kb_.entity(id), s});
  for (const auto& [id, s] : relation_scores) ctx.relations.push_back(scored_relation(id, s));
  sort_items(ctx.entities, entity_id_of);
  sort_items(ctx.relations, relation_id_of);
  if (ctx.entities.size() > k) ctx.entities.resize(k);
  if (ctx.relations.size() > k) ctx.relations.resize(k);
  return ctx;
}

RetrievedContext GraphRetriever::semantic_retrieve(const std::string& query, std::size_t k) const {
  if (k == 0) throw InvalidArgument("k must be >= 1");
  return semantic_for(embedder_->embed(query), k);
}

RetrievedContext GraphRetriever::relational_retrieve(const std::string& query, std::size_t k, std::size_t hop_expansion) const {
  if (k == 0) throw InvalidArgument("k must be >= 1");
  return relational_for(embedder_->embed(query), k, hop_expansion);
}

RetrievedContext GraphRetriever::hybrid_retrieve(const std::string& query, std::size_t k) const {
  if (k == 0) throw InvalidArgument("k must be >= 1");
  const Embedding q = embedder_->embed(query);
  RetrievedContext ctx = relational_for(q, k, config_.hop_expansion);
  ctx.chunks = semantic_for(q, k).chunks;
  return ctx;
}

RetrievedContext GraphRetriever::retrieve(const std::string& query, RetrievalMode mode, std::size_t k) {
  switch (mode) {
    case RetrievalMode::semantic: return semantic_retrieve(query, k);
    case RetrievalMode::relational: return relational_retrieve(query, k, config_.hop_expansion);
    case RetrievalMode::hybrid: return hybrid_retrieve(query, k);
  }
  throw InvalidArgument("unknown retrieval mode");
}

}  // namespace graphsearch
