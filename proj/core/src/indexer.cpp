#include "graphsearch/indexer.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "graphsearch/errors.hpp"
#include "graphsearch/llm.hpp"

namespace graphsearch {

using nlohmann::json;

std::vector<Document> parse_corpus(std::string_view jsonl) {
  std::vector<Document> docs;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  for (std::string_view line : text::split_lines(jsonl)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto j = json::parse(line, nullptr, false);
    const std::string where = "corpus line " + std::to_string(line_no);
    if (j.is_discarded() || !j.is_object()) throw InvalidArgument(where + ": malformed JSON");
    if (!j.contains("doc_id") || !j["doc_id"].is_string() || !j.contains("body") || !j["body"].is_string()) {
      throw InvalidArgument(where + ": doc_id and body are required strings");
    }
    Document d;
    d.doc_id = j["doc_id"].get<std::string>();
    d.body = j["body"].get<std::string>();
    if (j.contains("title") && j["title"].is_string()) d.title = j["title"].get<std::string>();
    if (d.doc_id.empty()) throw InvalidArgument(where + ": empty doc_id");
    if (!seen.insert(d.doc_id).second) throw InvalidArgument(where + ": duplicate doc_id '" + d.doc_id + "'");
    docs.push_back(std::move(d));
  }
  return docs;
}

std::vector<Document> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open corpus " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_corpus(ss.str());
}

std::vector<DocumentChunk> chunk_document(const Document& doc, const ChunkingOptions& options) {
  if (options.size_units < 1) throw InvalidArgument("chunk size must be >= 1 unit");
  if (options.overlap_units >= options.size_units) throw InvalidArgument("chunk overlap must be smaller than chunk size");
  const auto units = options.units(doc.body);
  const std::size_t stride = options.size_units - options.overlap_units;
  std::vector<DocumentChunk> chunks;
  for (std::size_t start = 0, ordinal = 0; start < units.size(); start += stride, ++ordinal) {
    const std::size_t end = std::min(units.size(), start + options.size_units);
    const std::size_t first = units[start].begin;
    const std::size_t last = units[end - 1].end;
    chunks.push_back(DocumentChunk{doc.doc_id, ordinal, doc.body.substr(first, last - first), start, end});
  }
  return chunks;
}

namespace {

const std::unordered_set<std::string>& sentence_function_words() {
  static const std::unordered_set<std::string> words = {
      "a",     "an",    "the",   "in",     "on",    "at",   "it",     "he",    "she",   "they",  "we",    "this",
      "that",  "these", "those", "his",    "her",   "its",  "their",  "there", "when",  "where", "who",   "what",
      "which", "after", "before", "during", "as",   "by",   "for",    "from",  "with",  "however", "although",
      "while", "since", "if",    "but",    "and",   "or",   "today",  "later", "also",  "i",     "you",   "our"};
  return words;
}

const std::unordered_set<std::string>& name_particles() {
  static const std::unordered_set<std::string> words = {"of", "de", "von", "van", "der", "du", "da", "del"};
  return words;
}

const std::unordered_set<std::string>& connective_verbs() {
  static const std::unordered_set<std::string> words = {
      "is",       "was",      "are",     "were",     "be",       "been",    "located",  "lies",    "lay",
      "born",     "died",     "created", "painted",  "became",   "becomes", "licensed", "founded", "married",
      "wrote",    "written",  "directed", "serves",  "served",   "has",     "had",      "have",    "owns",
      "owned",    "joined",   "won",     "plays",    "played",   "belongs", "contains", "includes", "borders",
      "named",    "called",   "produced", "composed", "built",   "designed", "moved",   "lived",    "leads",
      "led",      "hosts",    "hosted",  "occurred", "struck",   "flows",   "governs",  "governed", "succeeded",
      "preceded", "replaced", "adopted", "renamed",  "authored", "invented", "discovered", "released", "published"};
  return words;
}

struct Word {
  std::string text;         // punctuation-stripped surface form
  bool breaks_after = false;  // followed by , ; : ( ) or similar
};

bool is_capitalized(std::string_view w) {
  return !w.empty() && std::isupper(static_cast<unsigned char>(w.front())) != 0;
}

std::vector<std::string_view> split_sentences(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    const bool terminal = c == '\n' || ((c == '.' || c == '!' || c == '?') &&
                                        (i + 1 == s.size() || std::isspace(static_cast<unsigned char>(s[i + 1])) != 0));
    if (terminal) {
      const auto sentence = text::trim(s.substr(start, i + 1 - start));
      if (!sentence.empty()) out.push_back(sentence);
      start = i + 1;
    }
  }
  const auto tail = text::trim(s.substr(std::min(start, s.size())));
  if (!tail.empty()) out.push_back(tail);
  return out;
}

std::vector<Word> sentence_words(std::string_view sentence) {
  std::vector<Word> words;
  for (const auto span : text::whitespace_units(sentence)) {
    const std::string_view raw = sentence.substr(span.begin, span.end - span.begin);
    const std::string_view core = text::strip_surrounding_punctuation(raw);
    if (core.empty()) {
      if (!words.empty()) words.back().breaks_after = true;
      continue;
    }
    const std::size_t core_end = static_cast<std::size_t>(core.data() - raw.data()) + core.size();
    const std::size_t core_begin = static_cast<std::size_t>(core.data() - raw.data());
    if (core_begin > 0 && !words.empty()) words.back().breaks_after = true;
    words.push_back(Word{std::string(core), core_end < raw.size()});
  }
  return words;
}

struct Span {
  std::size_t begin;  // word indices, half-open
  std::size_t end;
  std::string name;
};

std::vector<Span> entity_spans(const std::vector<Word>& words) {
  std::vector<Span> spans;
  std::size_t i = 0;
  while (i < words.size()) {
    if (!is_capitalized(words[i].text)) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    bool open = !words[i].breaks_after;
    while (open && j < words.size()) {
      if (is_capitalized(words[j].text)) {
        open = !words[j].breaks_after;
        ++j;
      } else if (j + 1 < words.size() && name_particles().count(words[j].text) != 0 && !words[j].breaks_after &&
                 is_capitalized(words[j + 1].text)) {
        j += 1;  // particle joins; the capitalized word is consumed next iteration
      } else {
        break;
      }
    }
    std::size_t begin = i;
    if (sentence_function_words().count(text::case_fold(words[begin].text)) != 0) ++begin;
    if (begin < j) {
      std::string name;
      for (std::size_t k = begin; k < j; ++k) {
        if (!name.empty()) name.push_back(' ');
        name += words[k].text;
      }
      if (name.size() >= 2) spans.push_back(Span{begin, j, std::move(name)});
    }
    i = j;
  }
  return spans;
}

Properties parse_properties(std::string_view s) {
  Properties props;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto semi = s.find(';', start);
    const auto item = text::trim(s.substr(start, semi == std::string_view::npos ? s.size() - start : semi - start));
    if (!item.empty()) {
      const auto eq = item.find('=');
      if (eq == std::string_view::npos) {
        props.emplace_back(std::string(item), "");
      } else {
        props.emplace_back(std::string(text::trim(item.substr(0, eq))), std::string(text::trim(item.substr(eq + 1))));
      }
    }
    if (semi == std::string_view::npos) break;
    start = semi + 1;
  }
  return props;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto bar = line.find('|', start);
    fields.push_back(text::trim(line.substr(start, bar == std::string_view::npos ? line.size() - start : bar - start)));
    if (bar == std::string_view::npos) break;
    start = bar + 1;
  }
  return fields;
}

}  // namespace

ExtractionOutcome RuleBasedExtractor::extract(const Chunk& chunk) {
  ExtractionOutcome out;
  std::set<std::pair<std::string, std::string>> seen_entities;
  for (std::string_view sentence : split_sentences(chunk.text)) {
    const auto words = sentence_words(sentence);
    const auto spans = entity_spans(words);
    const std::string description(sentence);
    for (const auto& s : spans) {
      if (seen_entities.emplace(text::normalize_name(s.name), description).second) {
        out.result.entities.push_back(EntityCandidate{s.name, {}, description, {}});
      }
    }
    for (std::size_t k = 0; k + 1 < spans.size(); ++k) {
      bool connected = false;
      std::string predicate;
      for (std::size_t w = spans[k].end; w < spans[k + 1].begin; ++w) {
        const std::string lw = text::case_fold(words[w].text);
        if (connective_verbs().count(lw) != 0) connected = true;
        if (!predicate.empty()) predicate.push_back(' ');
        predicate += lw;
      }
      if (!connected) continue;
      out.result.relations.push_back(
          RelationCandidate{spans[k].name, spans[k + 1].name, {{"predicate", predicate}}, description});
    }
  }
  return out;
}

bool parse_extraction_records(std::string_view response, ExtractionResult& out, std::string& error) {
  out = {};
  std::size_t line_no = 0;
  for (std::string_view raw : text::split_lines(response)) {
    ++line_no;
    std::string_view line = text::trim(raw);
    if (line.empty()) continue;
    if (auto stripped = strip_list_marker(line)) line = *stripped;
    const auto fields = split_fields(line);
    if (fields[0] == "E" && fields.size() == 4) {
      if (fields[1].empty()) {
        error = "line " + std::to_string(line_no) + ": entity without name";
        return false;
      }
      out.entities.push_back(EntityCandidate{std::string(fields[1]), parse_properties(fields[2]), std::string(fields[3]), {}});
    } else if (fields[0] == "R" && fields.size() == 5) {
      if (fields[1].empty() || fields[2].empty()) {
        error = "line " + std::to_string(line_no) + ": relation without endpoints";
        return false;
      }
      out.relations.push_back(RelationCandidate{std::string(fields[1]), std::string(fields[2]), parse_properties(fields[3]),
                                                std::string(fields[4])});
    } else {
      error = "line " + std::to_string(line_no) + ": not an E| or R| record";
      return false;
    }
  }
  return true;
}

std::string LlmExtractor::identity() const { return "llm/" + llm_.identity(); }

ExtractionOutcome LlmExtractor::extract(const Chunk& chunk) {
  ExtractionOutcome out;
  const auto messages = render_prompt(TemplateId::extract, {{"text", chunk.text}});
  for (int attempt = 1; attempt <= attempts_; ++attempt) {
    const std::string response = llm_.complete(LlmRequest{TemplateId::extract, messages});
    std::string error;
    if (parse_extraction_records(response, out.result, error)) return out;
    out.warnings.push_back("chunk " + chunk.id.str() + " attempt " + std::to_string(attempt) + ": " + error);
  }
  out.result = {};
  out.failed = true;
  return out;
}

json to_json(const BuildReport& r) {
  json failures = json::array();
  for (const auto& f : r.failures) failures.push_back({{"chunk_id", f.chunk.str()}, {"message", f.message}});
  return json{{"extractor", r.extractor},
              {"documents", r.documents},
              {"chunks", r.chunks},
              {"entity_candidates", r.entity_candidates},
              {"entities", r.entities},
              {"merged_entities", r.merged_entities},
              {"relation_candidates", r.relation_candidates},
              {"relations", r.relations},
              {"dropped_relations", r.dropped_relations},
              {"self_loops", r.self_loops},
              {"extraction_failures", failures},
              {"warnings", r.warnings}};
}

BuildResult build_index(std::span<const Document> corpus, const BuildConfig& config, Extractor& extractor) {
  if (corpus.empty()) throw InvalidArgument("cannot build an index from an empty corpus");

  BuildResult result{GraphKB(config.kb), {}, {}};
  GraphKB& kb = result.kb;
  BuildReport& report = result.report;
  report.extractor = extractor.identity();
  report.documents = corpus.size();

  std::unordered_set<std::string> doc_ids;
  for (const Document& doc : corpus) {
    if (!doc_ids.insert(doc.doc_id).second) throw BuildError(doc.doc_id, "duplicate doc_id");
    std::vector<DocumentChunk> pieces;
    try {
      if (text::trim(doc.body).empty()) throw InvalidArgument("empty body");
      pieces = chunk_document(doc, config.chunking);
    } catch (const Error& e) {
      throw BuildError(doc.doc_id, std::string("chunking failed: ") + e.what());
    }
    for (auto& p : pieces) kb.add_chunk(p.doc_id, p.ordinal, std::move(p.text), p.unit_count());
    result.documents.push_back(DocumentSummary{doc.doc_id, pieces.size()});
  }
  report.chunks = kb.chunks().size();

  // Extraction may complete in any order; aggregation below walks chunk order.
  std::vector<ExtractionOutcome> outcomes(kb.chunks().size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < outcomes.size(); i = next++) {
      try {
        outcomes[i] = extractor.extract(kb.chunks()[i]);
      } catch (const std::exception& e) {
        outcomes[i] = ExtractionOutcome{{}, {e.what()}, true};
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(config.parallelism, 1, std::max<std::size_t>(1, outcomes.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const ChunkId cid = kb.chunks()[i].id;
    auto& outcome = outcomes[i];
    if (outcome.failed) {
      report.failures.push_back(
          ExtractionFailure{cid, outcome.warnings.empty() ? "extraction failed" : outcome.warnings.back()});
    }
    for (auto& w : outcome.warnings) report.warnings.push_back(std::move(w));
    if (outcome.failed) continue;
    for (auto& candidate : outcome.result.entities) {
      if (text::normalize_name(candidate.name).empty()) continue;
      ++report.entity_candidates;
      const std::size_t before = kb.entities().size();
      candidate.source_chunk_ids = {cid};
      kb.upsert_entity(candidate);
      if (kb.entities().size() == before) ++report.merged_entities;
    }
    for (auto& rc : outcome.result.relations) {
      ++report.relation_candidates;
      const auto head = kb.find_entity(rc.head);
      const auto tail = kb.find_entity(rc.tail);
      if (!head || !tail) {
        ++report.dropped_relations;
        report.warnings.push_back("chunk " + cid.str() + ": dropped relation '" + rc.head + "' -> '" + rc.tail +
                                  "' with unresolved endpoint");
        continue;
      }
      kb.insert_relation(*head, *tail, std::move(rc.properties), std::move(rc.description), {cid});
    }
  }
  report.entities = kb.entities().size();
  report.relations = kb.relations().size();
  report.self_loops = kb.self_loops().size();
  kb.freeze();
  return result;
}

}  // namespace graphsearch
