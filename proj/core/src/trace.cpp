#include "graphsearch/trace.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "graphsearch/errors.hpp"
#include "graphsearch/text.hpp"

namespace graphsearch {

using nlohmann::json;

namespace {

json props_json(const Properties& p) {
  json arr = json::array();
  for (const auto& [k, v] : p) arr.push_back(json::array({k, v}));
  return arr;
}

Properties props_from(const json& j) {
  Properties p;
  for (const auto& kv : j) p.emplace_back(kv.at(0).get<std::string>(), kv.at(1).get<std::string>());
  return p;
}

template <class Id>
json ids_json(const std::vector<Id>& ids) {
  json arr = json::array();
  for (Id id : ids) arr.push_back(id.value);
  return arr;
}

template <class Id>
std::vector<Id> ids_from(const json& j) {
  std::vector<Id> ids;
  for (const auto& v : j) ids.push_back(Id{v.get<std::uint64_t>()});
  return ids;
}

}  // namespace

void to_json(json& j, const RetrievedContext& ctx) {
  j = json{{"entities", json::array()}, {"relations", json::array()}, {"chunks", json::array()}};
  for (const auto& e : ctx.entities) {
    j["entities"].push_back({{"id", e.entity.id.value},
                             {"name", e.entity.name},
                             {"properties", props_json(e.entity.properties)},
                             {"description", e.entity.description},
                             {"sources", ids_json(e.entity.source_chunk_ids)},
                             {"score", e.score}});
  }
  for (const auto& r : ctx.relations) {
    j["relations"].push_back({{"id", r.relation.id.value},
                              {"head", r.relation.head.value},
                              {"tail", r.relation.tail.value},
                              {"head_name", r.head_name},
                              {"tail_name", r.tail_name},
                              {"properties", props_json(r.relation.properties)},
                              {"description", r.relation.description},
                              {"sources", ids_json(r.relation.source_chunk_ids)},
                              {"score", r.score}});
  }
  for (const auto& c : ctx.chunks) {
    j["chunks"].push_back({{"id", c.chunk.id.value},
                           {"doc_id", c.chunk.doc_id},
                           {"ordinal", c.chunk.ordinal},
                           {"text", c.chunk.text},
                           {"units", c.chunk.unit_count},
                           {"score", c.score}});
  }
}

void from_json(const json& j, RetrievedContext& ctx) {
  ctx = {};
  for (const auto& e : j.at("entities")) {
    ctx.entities.push_back(ScoredEntity{Entity{EntityId{e.at("id").get<std::uint64_t>()}, e.at("name").get<std::string>(),
                                               props_from(e.at("properties")), e.at("description").get<std::string>(),
                                               ids_from<ChunkId>(e.at("sources"))},
                                        e.at("score").get<double>()});
  }
  for (const auto& r : j.at("relations")) {
    ctx.relations.push_back(ScoredRelation{
        Relation{RelationId{r.at("id").get<std::uint64_t>()}, EntityId{r.at("head").get<std::uint64_t>()},
                 EntityId{r.at("tail").get<std::uint64_t>()}, props_from(r.at("properties")),
                 r.at("description").get<std::string>(), ids_from<ChunkId>(r.at("sources"))},
        r.at("head_name").get<std::string>(), r.at("tail_name").get<std::string>(), r.at("score").get<double>()});
  }
  for (const auto& c : j.at("chunks")) {
    ctx.chunks.push_back(ScoredChunk{Chunk{ChunkId{c.at("id").get<std::uint64_t>()}, c.at("doc_id").get<std::string>(),
                                           c.at("ordinal").get<std::size_t>(), c.at("text").get<std::string>(),
                                           c.at("units").get<std::size_t>()},
                                     c.at("score").get<double>()});
  }
}

void to_json(json& j, const SubQuery& sq) {
  j = json{{"id", sq.id},
           {"text", sq.text},
           {"channel", to_string(sq.channel)},
           {"origin_round", sq.origin_round},
           {"placeholders", sq.placeholders},
           {"status", to_string(sq.status)}};
}

void from_json(const json& j, SubQuery& sq) {
  sq.id = j.at("id").get<std::string>();
  sq.text = j.at("text").get<std::string>();
  sq.channel = channel_from_string(j.at("channel").get<std::string>());
  sq.origin_round = j.at("origin_round").get<std::size_t>();
  sq.placeholders = j.at("placeholders").get<std::vector<std::string>>();
  sq.status = status_from_string(j.at("status").get<std::string>());
}

void to_json(json& j, const EvidenceRecord& r) {
  j = json{{"sub_query", r.sub_query},
           {"raw_context", r.raw_context},
           {"refined_context", r.refined_context},
           {"intermediate_answer", r.intermediate_answer},
           {"round", r.round}};
}

void from_json(const json& j, EvidenceRecord& r) {
  r.sub_query = j.at("sub_query").get<SubQuery>();
  r.raw_context = j.at("raw_context").get<RetrievedContext>();
  r.refined_context = j.at("refined_context").get<RetrievedContext>();
  r.intermediate_answer = j.at("intermediate_answer").get<std::string>();
  r.round = j.at("round").get<std::size_t>();
}

void to_json(json& j, const LogicDraft& d) {
  j = json{{"steps", json::array()}, {"gaps", d.gaps}};
  for (const auto& s : d.steps) j["steps"].push_back({{"claim", s.claim}, {"supporting", s.supporting}});
}

void from_json(const json& j, LogicDraft& d) {
  d = {};
  for (const auto& s : j.at("steps")) {
    d.steps.push_back(DraftStep{s.at("claim").get<std::string>(), s.at("supporting").get<std::vector<std::string>>()});
  }
  d.gaps = j.at("gaps").get<std::vector<std::string>>();
}

void to_json(json& j, const VerificationDecision& v) {
  j = json{{"verdict", to_string(v.verdict)}, {"missing_points", v.missing_points}};
}

void from_json(const json& j, VerificationDecision& v) {
  const auto verdict = j.at("verdict").get<std::string>();
  if (verdict != "ACCEPT" && verdict != "REJECT") throw InvalidArgument("unknown verdict '" + verdict + "'");
  v.verdict = verdict == "ACCEPT" ? Verdict::accept : Verdict::reject;
  v.missing_points = j.at("missing_points").get<std::vector<std::string>>();
}

void SearchTrace::add(std::string_view type, std::size_t round, json payload) {
  events_.push_back(TraceEvent{std::string(type), round, std::move(payload)});
}

std::size_t SearchTrace::count(std::string_view type) const {
  std::size_t n = 0;
  for (const auto& e : events_) n += e.type == type ? 1 : 0;
  return n;
}

std::vector<const TraceEvent*> SearchTrace::of_type(std::string_view type) const {
  std::vector<const TraceEvent*> out;
  for (const auto& e : events_) {
    if (e.type == type) out.push_back(&e);
  }
  return out;
}

std::string SearchTrace::question() const {
  for (const auto& e : events_) {
    if (e.type == event::run_start) return e.payload.value("question", "");
  }
  return {};
}

std::optional<std::string> SearchTrace::final_answer() const {
  for (auto it = events_.rbegin(); it != events_.rend(); ++it) {
    if (it->type == event::final_answer) return it->payload.at("answer").get<std::string>();
  }
  return std::nullopt;
}

std::string SearchTrace::verification() const {
  for (auto it = events_.rbegin(); it != events_.rend(); ++it) {
    if (it->type == event::final_answer) return it->payload.value("verification", "");
  }
  return {};
}

std::size_t SearchTrace::rounds() const {
  std::size_t r = 0;
  for (const auto& e : events_) r = std::max(r, e.round);
  return r;
}

std::vector<EvidenceRecord> SearchTrace::records() const {
  std::vector<EvidenceRecord> out;
  for (const auto& e : events_) {
    if (e.type == event::record) out.push_back(e.payload.at("record").get<EvidenceRecord>());
  }
  return out;
}

std::vector<std::string> SearchTrace::warnings() const {
  std::vector<std::string> out;
  for (const auto& e : events_) {
    if (e.type == event::warning) out.push_back(e.payload.value("message", ""));
  }
  return out;
}

std::string SearchTrace::to_jsonl() const {
  std::string out;
  for (const auto& e : events_) {
    out += json{{"type", e.type}, {"round", e.round}, {"payload", e.payload}}.dump();
    out.push_back('\n');
  }
  return out;
}

SearchTrace SearchTrace::parse(std::string_view jsonl) {
  SearchTrace trace;
  std::size_t line_no = 0;
  for (std::string_view line : text::split_lines(jsonl)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw CorruptTrace(line_no, "malformed JSON");
    if (!j.contains("type") || !j["type"].is_string() || !j.contains("round") || !j["round"].is_number_unsigned() ||
        !j.contains("payload") || !j["payload"].is_object()) {
      throw CorruptTrace(line_no, "event needs string type, unsigned round and object payload");
    }
    const auto type = j["type"].get<std::string>();
    if (type == event::record) {
      try {
        (void)j["payload"].at("record").get<EvidenceRecord>();
      } catch (const std::exception& e) {
        throw CorruptTrace(line_no, std::string("bad evidence record: ") + e.what());
      }
    }
    trace.events_.push_back(TraceEvent{type, j["round"].get<std::size_t>(), j["payload"]});
  }
  if (trace.events_.empty()) throw CorruptTrace(line_no == 0 ? 1 : line_no, "trace contains no events");
  if (trace.events_.front().type != event::run_start) throw CorruptTrace(1, "trace does not begin with run_start");
  return trace;
}

void SearchTrace::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write trace " + path.string());
  out << to_jsonl();
}

SearchTrace SearchTrace::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open trace " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

Transcript transcript_from_trace(const SearchTrace& trace) {
  Transcript t;
  for (const auto* e : trace.of_type(event::llm_call)) {
    const auto name = e->payload.at("template").get<std::string>();
    const auto id = template_from_string(name);
    if (!id) throw FixtureError("trace references unknown template '" + name + "'");
    t.add(TranscriptEntry{*id, e->payload.at("ordinal").get<std::size_t>(), e->payload.at("response").get<std::string>(),
                          e->payload.at("digest").get<std::string>(), std::nullopt});
  }
  return t;
}

std::string render_trace(const SearchTrace& trace) {
  std::ostringstream out;
  out << "Question: " << trace.question() << "\n";

  std::vector<double> recall;
  for (const auto* m : trace.of_type(event::metrics)) {
    if (m->payload.contains("recall_by_step")) recall = m->payload["recall_by_step"].get<std::vector<double>>();
  }

  std::size_t current_round = static_cast<std::size_t>(-1);
  std::size_t step = 0;
  const auto header = [&](std::size_t round) {
    if (round == current_round) return;
    current_round = round;
    out << (round == 0 ? "Round 0 (initial pass)\n" : "Round " + std::to_string(round) + " (reflection)\n");
  };
  const auto list_queries = [&](const char* label, const json& list) {
    out << "  " << label << ":\n";
    for (const auto& sq : list) {
      out << "    [" << sq.at("id").get<std::string>() << "] " << sq.at("text").get<std::string>() << "\n";
    }
  };

  for (const auto& e : trace.events()) {
    if (e.type == event::decompose) {
      header(e.round);
      for (const char* ch : {"semantic", "relational", "hybrid"}) {
        if (e.payload.contains(ch) && !e.payload[ch].empty()) list_queries((std::string(ch) + " sub-queries").c_str(), e.payload[ch]);
      }
    } else if (e.type == event::record) {
      header(e.round);
      const auto rec = e.payload.at("record").get<EvidenceRecord>();
      out << "  step " << step + 1 << " [" << rec.sub_query.id << " " << to_string(rec.sub_query.channel) << "] "
          << rec.sub_query.text;
      if (!rec.intermediate_answer.empty()) out << " => " << rec.intermediate_answer;
      out << "  (chunks " << rec.refined_context.chunks.size() << ", entities " << rec.refined_context.entities.size()
          << ", relations " << rec.refined_context.relations.size() << ")";
      if (step < recall.size()) out << "  recall " << std::fixed << std::setprecision(2) << recall[step];
      out << "\n";
      ++step;
    } else if (e.type == event::draft) {
      header(e.round);
      const auto d = e.payload.at("draft").get<LogicDraft>();
      out << "  draft: " << d.steps.size() << " steps, " << d.gaps.size() << " gaps\n";
      for (const auto& g : d.gaps) out << "    gap: " << g << "\n";
    } else if (e.type == event::verdict) {
      header(e.round);
      const auto v = e.payload.at("decision").get<VerificationDecision>();
      out << "  verdict: " << to_string(v.verdict) << "\n";
      for (const auto& p : v.missing_points) out << "    missing: " << p << "\n";
    } else if (e.type == event::expansion) {
      header(e.round);
      list_queries("expansion queries", e.payload.at("queries"));
    } else if (e.type == event::final_answer) {
      out << "Final answer: " << e.payload.at("answer").get<std::string>() << " ("
          << e.payload.value("verification", "") << ")\n";
    } else if (e.type == event::error) {
      out << "ERROR: " << e.payload.value("message", "") << "\n";
    }
  }
  out << "LLM calls: " << trace.llm_calls() << ", retrieval calls: " << trace.retrieval_calls() << "\n";
  return out.str();
}

}  // namespace graphsearch
