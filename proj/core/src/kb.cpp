#include "graphsearch/kb.hpp"

#include <algorithm>
#include <deque>

#include "graphsearch/errors.hpp"
#include "graphsearch/text.hpp"

namespace graphsearch {
namespace {

std::string chunk_key(std::string_view doc_id, std::size_t ordinal) {
  std::string key(doc_id);
  key.push_back('\x1f');
  key += std::to_string(ordinal);
  return key;
}

void union_sorted(std::vector<ChunkId>& into, const std::vector<ChunkId>& from) {
  into.insert(into.end(), from.begin(), from.end());
  std::sort(into.begin(), into.end());
  into.erase(std::unique(into.begin(), into.end()), into.end());
}

void union_properties(Properties& into, const Properties& from) {
  for (const auto& kv : from) {
    if (std::find(into.begin(), into.end(), kv) == into.end()) into.push_back(kv);
  }
}

// Cuts at `limit` bytes without splitting a UTF-8 sequence.
void truncate_utf8(std::string& s, std::size_t limit) {
  if (s.size() <= limit) return;
  std::size_t cut = limit;
  while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
  s.resize(cut);
}

}  // namespace

GraphKB::GraphKB(KbOptions options) : options_(options) {}

GraphKB GraphKB::from_records(std::vector<Chunk> chunks, std::vector<Entity> entities,
                              std::vector<Relation> relations, KbOptions options) {
  GraphKB kb(options);
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    auto& c = chunks[i];
    if (c.id.value != i) throw InvalidArgument("chunk id " + c.id.str() + " out of sequence at record " + std::to_string(i));
    if (c.text.empty()) throw InvalidArgument("chunk " + c.id.str() + " has empty text");
    if (!kb.chunk_keys_.insert(chunk_key(c.doc_id, c.ordinal)).second) {
      throw InvalidArgument("duplicate (doc_id, ordinal) for chunk " + c.id.str());
    }
    kb.chunks_.push_back(std::move(c));
  }
  for (std::size_t i = 0; i < entities.size(); ++i) {
    auto& e = entities[i];
    if (e.id.value != i) throw InvalidArgument("entity id " + e.id.str() + " out of sequence at record " + std::to_string(i));
    if (e.name.empty()) throw InvalidArgument("entity " + e.id.str() + " has empty name");
    for (ChunkId c : e.source_chunk_ids) {
      if (!kb.contains(c)) throw InvalidArgument("entity " + e.id.str() + " references unknown chunk " + c.str());
    }
    if (!std::is_sorted(e.source_chunk_ids.begin(), e.source_chunk_ids.end())) {
      throw InvalidArgument("entity " + e.id.str() + " source chunks not sorted");
    }
    if (!kb.name_index_.emplace(text::normalize_name(e.name), e.id).second) {
      throw InvalidArgument("duplicate entity name '" + e.name + "'");
    }
    kb.entities_.push_back(std::move(e));
  }
  kb.adjacency_.resize(kb.entities_.size());
  for (std::size_t i = 0; i < relations.size(); ++i) {
    auto& r = relations[i];
    if (r.id.value != i) throw InvalidArgument("relation id " + r.id.str() + " out of sequence at record " + std::to_string(i));
    if (!kb.contains(r.head) || !kb.contains(r.tail)) {
      throw InvalidArgument("relation " + r.id.str() + " has an unknown endpoint");
    }
    for (ChunkId c : r.source_chunk_ids) {
      if (!kb.contains(c)) throw InvalidArgument("relation " + r.id.str() + " references unknown chunk " + c.str());
    }
    kb.adjacency_[r.head.value].push_back(r.id);
    if (r.tail != r.head) {
      kb.adjacency_[r.tail.value].push_back(r.id);
    } else {
      kb.self_loops_.push_back(r.id);
    }
    kb.relations_.push_back(std::move(r));
  }
  return kb;
}

void GraphKB::require_writable() const {
  if (frozen_) throw InvalidArgument("graph KB is frozen");
}

ChunkId GraphKB::add_chunk(std::string doc_id, std::size_t ordinal, std::string text, std::size_t unit_count) {
  require_writable();
  if (text.empty()) throw InvalidArgument("chunk text must be non-empty");
  if (!chunk_keys_.insert(chunk_key(doc_id, ordinal)).second) {
    throw InvalidArgument("duplicate chunk (" + doc_id + ", " + std::to_string(ordinal) + ")");
  }
  const ChunkId id{chunks_.size()};
  chunks_.push_back(Chunk{id, std::move(doc_id), ordinal, std::move(text), unit_count});
  return id;
}

std::string GraphKB::merge_description(const std::string& current, const std::string& addition) const {
  if (addition.empty()) return current;
  std::string merged;
  if (current.empty()) {
    merged = addition;
  } else {
    // Skip an addition already present as a run of whole segments so
    // repeated upserts are idempotent.
    const std::string sep(kDescriptionSeparator);
    const std::string padded = sep + current + sep;
    if (padded.find(sep + addition + sep) != std::string::npos) return current;
    merged = current;
    merged += kDescriptionSeparator;
    merged += addition;
  }
  truncate_utf8(merged, options_.max_description_chars);
  return merged;
}

EntityId GraphKB::upsert_entity(const EntityCandidate& candidate) {
  require_writable();
  const std::string key = text::normalize_name(candidate.name);
  if (key.empty()) throw InvalidArgument("entity name must be non-empty");
  for (ChunkId c : candidate.source_chunk_ids) {
    if (!contains(c)) throw NotFound("unknown source chunk " + c.str() + " for entity '" + candidate.name + "'");
  }

  if (auto it = name_index_.find(key); it != name_index_.end()) {
    Entity& e = entities_[it->second.value];
    union_properties(e.properties, candidate.properties);
    union_sorted(e.source_chunk_ids, candidate.source_chunk_ids);
    e.description = merge_description(e.description, candidate.description);
    return e.id;
  }

  Entity e;
  e.id = EntityId{entities_.size()};
  e.name = text::collapse_whitespace(candidate.name);
  union_properties(e.properties, candidate.properties);
  union_sorted(e.source_chunk_ids, candidate.source_chunk_ids);
  e.description = merge_description("", candidate.description);
  name_index_.emplace(key, e.id);
  entities_.push_back(std::move(e));
  adjacency_.emplace_back();
  return entities_.back().id;
}

RelationId GraphKB::insert_relation(EntityId head, EntityId tail, Properties properties, std::string description,
                                    std::vector<ChunkId> source_chunk_ids) {
  require_writable();
  if (!contains(head)) throw NotFound("unknown head entity " + head.str());
  if (!contains(tail)) throw NotFound("unknown tail entity " + tail.str());
  for (ChunkId c : source_chunk_ids) {
    if (!contains(c)) throw NotFound("unknown source chunk " + c.str() + " for relation");
  }
  std::sort(source_chunk_ids.begin(), source_chunk_ids.end());
  source_chunk_ids.erase(std::unique(source_chunk_ids.begin(), source_chunk_ids.end()), source_chunk_ids.end());

  const RelationId id{relations_.size()};
  relations_.push_back(Relation{id, head, tail, std::move(properties), std::move(description), std::move(source_chunk_ids)});
  adjacency_[head.value].push_back(id);
  if (tail != head) {
    adjacency_[tail.value].push_back(id);
  } else {
    self_loops_.push_back(id);
  }
  return id;
}

const Chunk& GraphKB::chunk(ChunkId id) const {
  if (!contains(id)) throw NotFound("unknown chunk " + id.str());
  return chunks_[id.value];
}

const Entity& GraphKB::entity(EntityId id) const {
  if (!contains(id)) throw NotFound("unknown entity " + id.str());
  return entities_[id.value];
}

const Relation& GraphKB::relation(RelationId id) const {
  if (!contains(id)) throw NotFound("unknown relation " + id.str());
  return relations_[id.value];
}

std::optional<EntityId> GraphKB::find_entity(std::string_view name) const {
  if (auto it = name_index_.find(text::normalize_name(name)); it != name_index_.end()) return it->second;
  return std::nullopt;
}

std::span<const RelationId> GraphKB::incident(EntityId id) const {
  if (!contains(id)) throw NotFound("unknown entity " + id.str());
  return adjacency_[id.value];
}

Subgraph GraphKB::neighbors(EntityId origin, std::size_t hops) const {
  if (!contains(origin)) throw NotFound("unknown entity " + origin.str());
  if (hops == 0) throw InvalidArgument("hops must be >= 1");

  constexpr auto kUnseen = static_cast<std::size_t>(-1);
  std::unordered_map<std::uint64_t, std::size_t> entity_dist;
  std::unordered_map<std::uint64_t, std::size_t> relation_dist;
  std::deque<EntityId> frontier{origin};
  entity_dist[origin.value] = 0;

  while (!frontier.empty()) {
    const EntityId cur = frontier.front();
    frontier.pop_front();
    const std::size_t d = entity_dist[cur.value];
    if (d >= hops) continue;
    for (RelationId rid : adjacency_[cur.value]) {
      relation_dist.try_emplace(rid.value, d + 1);
      const Relation& r = relations_[rid.value];
      const EntityId other = r.head == cur ? r.tail : r.head;
      auto [it, inserted] = entity_dist.try_emplace(other.value, kUnseen);
      if (inserted) {
        it->second = d + 1;
        frontier.push_back(other);
      }
    }
  }

  Subgraph out;
  std::vector<std::pair<std::uint64_t, std::size_t>> es(entity_dist.begin(), entity_dist.end());
  std::vector<std::pair<std::uint64_t, std::size_t>> rs(relation_dist.begin(), relation_dist.end());
  std::sort(es.begin(), es.end());
  std::sort(rs.begin(), rs.end());
  for (auto [id, d] : es) {
    out.entities.push_back(EntityId{id});
    out.entity_hops.push_back(d);
  }
  for (auto [id, d] : rs) {
    out.relations.push_back(RelationId{id});
    out.relation_hops.push_back(d);
  }
  return out;
}

std::vector<std::string> GraphKB::audit() const {
  std::vector<std::string> problems;
  std::unordered_set<std::string> keys;
  for (std::size_t i = 0; i < chunks_.size(); ++i) {
    const Chunk& c = chunks_[i];
    if (c.id.value != i) problems.push_back("chunk at slot " + std::to_string(i) + " has id " + c.id.str());
    if (c.text.empty()) problems.push_back("chunk " + c.id.str() + " has empty text");
    if (!keys.insert(chunk_key(c.doc_id, c.ordinal)).second) {
      problems.push_back("chunk " + c.id.str() + " duplicates (doc_id, ordinal)");
    }
  }
  std::unordered_set<std::string> names;
  for (std::size_t i = 0; i < entities_.size(); ++i) {
    const Entity& e = entities_[i];
    if (e.id.value != i) problems.push_back("entity at slot " + std::to_string(i) + " has id " + e.id.str());
    if (e.name.empty()) problems.push_back("entity " + e.id.str() + " has empty name");
    if (!names.insert(text::normalize_name(e.name)).second) {
      problems.push_back("entity " + e.id.str() + " duplicates name '" + e.name + "'");
    }
    for (ChunkId c : e.source_chunk_ids) {
      if (!contains(c)) problems.push_back("entity " + e.id.str() + " references missing chunk " + c.str());
    }
  }
  if (adjacency_.size() != entities_.size()) problems.push_back("adjacency size differs from entity count");
  std::size_t expected_entries = 0;
  for (std::size_t i = 0; i < relations_.size(); ++i) {
    const Relation& r = relations_[i];
    if (r.id.value != i) problems.push_back("relation at slot " + std::to_string(i) + " has id " + r.id.str());
    for (ChunkId c : r.source_chunk_ids) {
      if (!contains(c)) problems.push_back("relation " + r.id.str() + " references missing chunk " + c.str());
    }
    if (!contains(r.head) || !contains(r.tail)) {
      problems.push_back("relation " + r.id.str() + " has a dangling endpoint");
      continue;
    }
    expected_entries += r.head == r.tail ? 1 : 2;
    for (EntityId end : {r.head, r.tail}) {
      if (end.value >= adjacency_.size()) continue;
      const auto& adj = adjacency_[end.value];
      if (std::find(adj.begin(), adj.end(), r.id) == adj.end()) {
        problems.push_back("relation " + r.id.str() + " missing from adjacency of entity " + end.str());
      }
    }
  }
  std::size_t actual_entries = 0;
  for (std::size_t e = 0; e < adjacency_.size(); ++e) {
    actual_entries += adjacency_[e].size();
    for (RelationId rid : adjacency_[e]) {
      if (!contains(rid)) {
        problems.push_back("adjacency of entity " + std::to_string(e) + " lists missing relation " + rid.str());
      } else if (relations_[rid.value].head.value != e && relations_[rid.value].tail.value != e) {
        problems.push_back("adjacency of entity " + std::to_string(e) + " lists non-incident relation " + rid.str());
      }
    }
  }
  if (actual_entries != expected_entries) problems.push_back("adjacency has stray or duplicated entries");
  return problems;
}

}  // namespace graphsearch
