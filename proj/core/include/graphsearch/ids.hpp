#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>

namespace graphsearch {

/// Dense, monotonically assigned identifier. Rendered as a decimal string
/// when persisted; ordering matches assignment order.
template <class Tag>
struct Id {
  std::uint64_t value = 0;

  auto operator<=>(const Id&) const = default;
  std::string str() const { return std::to_string(value); }
};

struct ChunkTag {};
struct EntityTag {};
struct RelationTag {};

using ChunkId = Id<ChunkTag>;
using EntityId = Id<EntityTag>;
using RelationId = Id<RelationTag>;

}  // namespace graphsearch

template <class Tag>
struct std::hash<graphsearch::Id<Tag>> {
  std::size_t operator()(const graphsearch::Id<Tag>& id) const noexcept {
    return std::hash<std::uint64_t>{}(id.value);
  }
};
