#include "graphsearch/kb_store.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "graphsearch/errors.hpp"
#include "graphsearch/text.hpp"

namespace graphsearch {
namespace {

using nlohmann::json;

json properties_json(const Properties& props) {
  json arr = json::array();
  for (const auto& [k, v] : props) arr.push_back(json::array({k, v}));
  return arr;
}

Properties properties_from(const json& j) {
  Properties props;
  for (const auto& kv : j) props.emplace_back(kv.at(0).get<std::string>(), kv.at(1).get<std::string>());
  return props;
}

template <class Id>
json ids_json(const std::vector<Id>& ids) {
  json arr = json::array();
  for (Id id : ids) arr.push_back(id.str());
  return arr;
}

template <class Id>
Id parse_id(const json& j) {
  const auto s = j.get<std::string>();
  std::size_t used = 0;
  const auto v = std::stoull(s, &used);
  if (used != s.size() || s.empty() || (s.size() > 1 && s[0] == '0')) throw std::invalid_argument("malformed id '" + s + "'");
  return Id{v};
}

template <class Id>
std::vector<Id> ids_from(const json& j) {
  std::vector<Id> ids;
  for (const auto& v : j) ids.push_back(parse_id<Id>(v));
  return ids;
}

json manifest_json(const Manifest& m) {
  json docs = json::array();
  for (const auto& d : m.documents) docs.push_back({{"doc_id", d.doc_id}, {"chunks", d.chunks}});
  return json{{"format_version", m.format_version},
              {"chunking", {{"size_units", m.chunk_size_units}, {"overlap_units", m.chunk_overlap_units}, {"unit", m.chunk_unit}}},
              {"extractor", m.extractor},
              {"embedder", {{"identity", m.embedder}, {"dimension", m.embedding_dimension}}},
              {"documents", docs},
              {"counts", {{"chunks", m.chunk_count}, {"entities", m.entity_count}, {"relations", m.relation_count}}},
              {"max_description_chars", m.max_description_chars}};
}

Manifest manifest_from(const json& j) {
  Manifest m;
  m.format_version = j.at("format_version").get<int>();
  if (m.format_version != kStoreFormatVersion) {
    throw std::runtime_error("unsupported format_version " + std::to_string(m.format_version) + " (expected " +
                             std::to_string(kStoreFormatVersion) + ")");
  }
  const auto& chunking = j.at("chunking");
  m.chunk_size_units = chunking.at("size_units").get<std::size_t>();
  m.chunk_overlap_units = chunking.at("overlap_units").get<std::size_t>();
  m.chunk_unit = chunking.at("unit").get<std::string>();
  m.extractor = j.at("extractor").get<std::string>();
  m.embedder = j.at("embedder").at("identity").get<std::string>();
  m.embedding_dimension = j.at("embedder").at("dimension").get<std::size_t>();
  for (const auto& d : j.at("documents")) {
    m.documents.push_back({d.at("doc_id").get<std::string>(), d.at("chunks").get<std::size_t>()});
  }
  const auto& counts = j.at("counts");
  m.chunk_count = counts.at("chunks").get<std::size_t>();
  m.entity_count = counts.at("entities").get<std::size_t>();
  m.relation_count = counts.at("relations").get<std::size_t>();
  m.max_description_chars = j.at("max_description_chars").get<std::size_t>();
  return m;
}

std::string read_file(const std::filesystem::path& path, const std::string& name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreError(name, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StoreError(path.filename().string(), "cannot open file for writing");
  out << content;
  if (!out) throw StoreError(path.filename().string(), "write failed");
}

// Splits a record file into JSON lines; rejects a missing final newline as truncation.
std::vector<json> read_records(const std::filesystem::path& dir, const std::string& name, std::size_t expected) {
  const std::string content = read_file(dir / name, name);
  std::vector<json> records;
  if (content.empty()) {
    if (expected != 0) throw StoreError(name, "expected " + std::to_string(expected) + " records, file is empty");
    return records;
  }
  if (content.back() != '\n') throw StoreError(name, "truncated record at end of file");
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < content.size()) {
    const std::size_t nl = content.find('\n', start);
    ++line_no;
    const std::string_view line(content.data() + start, nl - start);
    start = nl + 1;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw StoreError(name, "line " + std::to_string(line_no) + ": malformed record");
    records.push_back(std::move(j));
  }
  if (records.size() != expected) {
    throw StoreError(name, "expected " + std::to_string(expected) + " records, found " + std::to_string(records.size()));
  }
  return records;
}

}  // namespace

std::string serialize_table(const GraphKB& kb, KbTable table) {
  std::string out;
  switch (table) {
    case KbTable::chunks:
      for (const Chunk& c : kb.chunks()) {
        out += json{{"id", c.id.str()}, {"doc_id", c.doc_id}, {"ordinal", c.ordinal}, {"text", c.text}, {"units", c.unit_count}}.dump();
        out.push_back('\n');
      }
      break;
    case KbTable::entities:
      for (const Entity& e : kb.entities()) {
        out += json{{"id", e.id.str()},
                    {"name", e.name},
                    {"properties", properties_json(e.properties)},
                    {"description", e.description},
                    {"sources", ids_json(e.source_chunk_ids)}}
                   .dump();
        out.push_back('\n');
      }
      break;
    case KbTable::relations:
      for (const Relation& r : kb.relations()) {
        out += json{{"id", r.id.str()},
                    {"head", r.head.str()},
                    {"tail", r.tail.str()},
                    {"properties", properties_json(r.properties)},
                    {"description", r.description},
                    {"sources", ids_json(r.source_chunk_ids)}}
                   .dump();
        out.push_back('\n');
      }
      break;
  }
  return out;
}

std::string serialize_manifest(const Manifest& manifest) { return manifest_json(manifest).dump(2) + "\n"; }

void save_kb(const GraphKB& kb, const std::filesystem::path& dir, Manifest manifest) {
  std::filesystem::create_directories(dir);
  manifest.chunk_count = kb.chunks().size();
  manifest.entity_count = kb.entities().size();
  manifest.relation_count = kb.relations().size();
  manifest.max_description_chars = kb.options().max_description_chars;
  write_file(dir / kChunksFile, serialize_table(kb, KbTable::chunks));
  write_file(dir / kEntitiesFile, serialize_table(kb, KbTable::entities));
  write_file(dir / kRelationsFile, serialize_table(kb, KbTable::relations));
  // Manifest last: a directory without one is never mistaken for a complete index.
  write_file(dir / kManifestFile, serialize_manifest(manifest));
}

Manifest load_manifest(const std::filesystem::path& dir) {
  const std::string content = read_file(dir / kManifestFile, kManifestFile);
  const auto j = json::parse(content, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw StoreError(kManifestFile, "malformed manifest");
  try {
    return manifest_from(j);
  } catch (const std::exception& e) {
    throw StoreError(kManifestFile, e.what());
  }
}

LoadedKb load_kb(const std::filesystem::path& dir) {
  Manifest manifest = load_manifest(dir);

  std::vector<Chunk> chunks;
  std::vector<Entity> entities;
  std::vector<Relation> relations;

  const auto parse_table = [&](const std::string& name, std::size_t expected, auto&& fn) {
    const auto records = read_records(dir, name, expected);
    for (std::size_t i = 0; i < records.size(); ++i) {
      try {
        fn(records[i]);
      } catch (const std::exception& e) {
        throw StoreError(name, "line " + std::to_string(i + 1) + ": " + e.what());
      }
    }
  };

  parse_table(kChunksFile, manifest.chunk_count, [&](const json& j) {
    chunks.push_back(Chunk{parse_id<ChunkId>(j.at("id")), j.at("doc_id").get<std::string>(), j.at("ordinal").get<std::size_t>(),
                           j.at("text").get<std::string>(), j.at("units").get<std::size_t>()});
  });
  parse_table(kEntitiesFile, manifest.entity_count, [&](const json& j) {
    entities.push_back(Entity{parse_id<EntityId>(j.at("id")), j.at("name").get<std::string>(), properties_from(j.at("properties")),
                              j.at("description").get<std::string>(), ids_from<ChunkId>(j.at("sources"))});
  });
  parse_table(kRelationsFile, manifest.relation_count, [&](const json& j) {
    relations.push_back(Relation{parse_id<RelationId>(j.at("id")), parse_id<EntityId>(j.at("head")),
                                 parse_id<EntityId>(j.at("tail")), properties_from(j.at("properties")),
                                 j.at("description").get<std::string>(), ids_from<ChunkId>(j.at("sources"))});
  });

  try {
    GraphKB kb = GraphKB::from_records(std::move(chunks), std::move(entities), std::move(relations),
                                       KbOptions{manifest.max_description_chars});
    kb.freeze();
    return LoadedKb{std::move(kb), std::move(manifest)};
  } catch (const InvalidArgument& e) {
    const std::string what = e.what();
    const char* file = what.rfind("chunk", 0) == 0 ? kChunksFile : what.rfind("relation", 0) == 0 ? kRelationsFile : kEntitiesFile;
    throw StoreError(file, what);
  }
}

}  // namespace graphsearch
