#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "graphsearch/ids.hpp"

namespace graphsearch {

/// Opaque key/value pairs in insertion order.
using Properties = std::vector<std::pair<std::string, std::string>>;

struct Chunk {
  ChunkId id;
  std::string doc_id;
  std::size_t ordinal = 0;
  std::string text;
  std::size_t unit_count = 0;

  friend bool operator==(const Chunk&, const Chunk&) = default;
};

struct Entity {
  EntityId id;
  std::string name;
  Properties properties;
  std::string description;
  std::vector<ChunkId> source_chunk_ids;  // sorted, unique

  friend bool operator==(const Entity&, const Entity&) = default;
};

struct Relation {
  RelationId id;
  EntityId head;
  EntityId tail;
  Properties properties;
  std::string description;
  std::vector<ChunkId> source_chunk_ids;  // sorted, unique

  friend bool operator==(const Relation&, const Relation&) = default;
};

/// Input to GraphKB::upsert_entity.
struct EntityCandidate {
  std::string name;
  Properties properties;
  std::string description;
  std::vector<ChunkId> source_chunk_ids;
};

/// Entities reachable from an origin and the relations traversed to reach
/// them. Both lists are sorted by id; `entity_hops[i]` is the traversal
/// distance of `entities[i]`, `relation_hops[i]` the distance of the nearer
/// endpoint of `relations[i]` plus one.
struct Subgraph {
  std::vector<EntityId> entities;
  std::vector<std::size_t> entity_hops;
  std::vector<RelationId> relations;
  std::vector<std::size_t> relation_hops;
};

struct KbOptions {
  std::size_t max_description_chars = 2048;

  friend bool operator==(const KbOptions&, const KbOptions&) = default;
};

inline constexpr std::string_view kDescriptionSeparator = " | ";

/// Graph knowledge base: entities, relations and the chunks they were
/// extracted from. Directed multigraph; adjacency lists every relation under
/// both endpoints. Single writer until freeze(), then read-only.
class GraphKB {
 public:
  explicit GraphKB(KbOptions options = {});

  /// Rebuilds a store from persisted records. Ids must be dense and in
  /// order; throws InvalidArgument describing the first violation.
  static GraphKB from_records(std::vector<Chunk> chunks, std::vector<Entity> entities,
                              std::vector<Relation> relations, KbOptions options = {});

  ChunkId add_chunk(std::string doc_id, std::size_t ordinal, std::string text, std::size_t unit_count);

  /// Merges into an existing entity with the same normalized name, or inserts.
  EntityId upsert_entity(const EntityCandidate& candidate);

  RelationId insert_relation(EntityId head, EntityId tail, Properties properties, std::string description,
                             std::vector<ChunkId> source_chunk_ids);

  void freeze() noexcept { frozen_ = true; }
  bool frozen() const noexcept { return frozen_; }

  const Chunk& chunk(ChunkId id) const;
  const Entity& entity(EntityId id) const;
  const Relation& relation(RelationId id) const;
  bool contains(ChunkId id) const noexcept { return id.value < chunks_.size(); }
  bool contains(EntityId id) const noexcept { return id.value < entities_.size(); }
  bool contains(RelationId id) const noexcept { return id.value < relations_.size(); }

  std::optional<EntityId> find_entity(std::string_view name) const;

  std::span<const Chunk> chunks() const noexcept { return chunks_; }
  std::span<const Entity> entities() const noexcept { return entities_; }
  std::span<const Relation> relations() const noexcept { return relations_; }
  std::span<const RelationId> incident(EntityId id) const;

  Subgraph neighbors(EntityId origin, std::size_t hops) const;

  /// Relations whose head equals their tail, in insertion order.
  const std::vector<RelationId>& self_loops() const noexcept { return self_loops_; }

  /// Full-store consistency check; returns one line per violation.
  std::vector<std::string> audit() const;

  const KbOptions& options() const noexcept { return options_; }

  bool empty() const noexcept { return chunks_.empty() && entities_.empty() && relations_.empty(); }

  friend bool operator==(const GraphKB& a, const GraphKB& b) {
    return a.options_ == b.options_ && a.chunks_ == b.chunks_ && a.entities_ == b.entities_ &&
           a.relations_ == b.relations_;
  }

 private:
  void require_writable() const;
  std::string merge_description(const std::string& current, const std::string& addition) const;

  KbOptions options_;
  bool frozen_ = false;
  std::vector<Chunk> chunks_;
  std::vector<Entity> entities_;
  std::vector<Relation> relations_;
  std::vector<std::vector<RelationId>> adjacency_;
  std::unordered_map<std::string, EntityId> name_index_;
  std::unordered_set<std::string> chunk_keys_;
  std::vector<RelationId> self_loops_;
};

}  // namespace graphsearch
