#include "test_support.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "graphsearch/indexer.hpp"
#include "graphsearch/text.hpp"

#ifndef GRAPHSEARCH_FIXTURE_DIR
#error "GRAPHSEARCH_FIXTURE_DIR must be defined"
#endif

namespace graphsearch::testing {

namespace {

const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> words = {
      "river", "station", "capital", "county", "town",   "licensed", "became", "located", "state",  "radio",
      "city",  "north",   "south",   "old",    "new",    "bridge",   "market", "church",  "school", "valley",
      "mill",  "harbor",  "forest",  "lake",   "tower",  "museum",   "farm",   "road",    "hill",   "port"};
  return words;
}

const std::vector<std::string>& name_parts() {
  static const std::vector<std::string> parts = {"Alder", "Birch", "Cedar", "Dover", "Elm",   "Fulton", "Grant",
                                                 "Huron", "Irwin", "Jasper", "Knox", "Logan", "Marion", "Niles"};
  return parts;
}

}  // namespace

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  std::random_device rd;
  path_ = std::filesystem::temp_directory_path() /
          ("graphsearch-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::filesystem::path fixture_path(const std::string& relative) {
  return std::filesystem::path(GRAPHSEARCH_FIXTURE_DIR) / relative;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

std::string random_words(std::mt19937_64& rng, std::size_t min_words, std::size_t max_words) {
  const auto& vocab = vocabulary();
  std::uniform_int_distribution<std::size_t> count(min_words, max_words);
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
  std::string out;
  for (std::size_t i = count(rng); i > 0; --i) {
    if (!out.empty()) out.push_back(' ');
    out += vocab[pick(rng)];
  }
  return out;
}

std::string random_name(std::mt19937_64& rng, std::size_t index) {
  const auto& parts = name_parts();
  std::uniform_int_distribution<std::size_t> pick(0, parts.size() - 1);
  return parts[pick(rng)] + " " + parts[pick(rng)] + " " + std::to_string(index);
}

GraphKB random_kb(std::mt19937_64& rng, std::size_t chunks, std::size_t entities, std::size_t relations) {
  GraphKB kb;
  for (std::size_t i = 0; i < chunks; ++i) {
    const std::string text = random_words(rng, 3, 12);
    kb.add_chunk("doc" + std::to_string(i / 3), i % 3, text, text::whitespace_units(text).size());
  }
  for (std::size_t i = 0; i < entities; ++i) {
    std::vector<ChunkId> sources;
    if (chunks > 0) sources.push_back(ChunkId{rng() % chunks});
    kb.upsert_entity(EntityCandidate{random_name(rng, i), {}, random_words(rng, 2, 8), sources});
  }
  for (std::size_t i = 0; i < relations && entities > 0; ++i) {
    const EntityId head{rng() % entities};
    const EntityId tail{rng() % entities};
    std::vector<ChunkId> sources;
    if (chunks > 0) sources.push_back(ChunkId{rng() % chunks});
    kb.insert_relation(head, tail, {{"predicate", "rel" + std::to_string(rng() % 5)}}, random_words(rng, 2, 8), sources);
  }
  kb.freeze();
  return kb;
}

HttpResponse FakeTransport::post(const std::string& url, const Headers& headers, const std::string& body,
                                 std::chrono::milliseconds timeout) {
  std::lock_guard lock(mu_);
  requests.push_back(Request{url, headers, body, timeout});
  if (replies_.empty()) return HttpResponse{0, {}, "no scripted reply"};
  HttpResponse r = replies_.front();
  replies_.pop_front();
  return r;
}

}  // namespace graphsearch::testing

namespace graphsearch::testing {

namespace {

double norm_d(const Embedding& v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(s);
}

double cos_d(const Embedding& q, const Embedding& r) {
  const double qn = norm_d(q);
  const double rn = norm_d(r);
  if (qn == 0.0 || rn == 0.0) return 0.0;
  double dot = 0.0;
  for (std::size_t d = 0; d < q.size(); ++d) dot += static_cast<double>(q[d]) * static_cast<double>(r[d]);
  return dot / (qn * rn);
}

// (score, index) pairs ranked by descending score, then ascending index.
std::vector<std::pair<double, std::size_t>> ranked(std::vector<double> scores) {
  std::vector<std::pair<double, std::size_t>> out;
  for (std::size_t i = 0; i < scores.size(); ++i) out.emplace_back(scores[i], i);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
  return out;
}

}  // namespace

RetrievedContext oracle_retrieve(const GraphKB& kb, EmbeddingProvider& embedder, const std::string& query,
                                 RetrievalMode mode, std::size_t k, std::size_t hops, double decay) {
  const Embedding q = embedder.embed(query);
  RetrievedContext ctx;

  if (mode != RetrievalMode::relational) {
    std::vector<double> s;
    for (const Chunk& c : kb.chunks()) s.push_back(cos_d(q, embedder.embed(c.text)));
    auto r = ranked(s);
    for (std::size_t i = 0; i < std::min(k, r.size()); ++i) ctx.chunks.push_back(ScoredChunk{kb.chunks()[r[i].second], r[i].first});
  }
  if (mode == RetrievalMode::semantic) return ctx;

  const std::size_t ne = kb.entities().size();
  const std::size_t nr = kb.relations().size();
  std::vector<double> es;
  for (const Entity& e : kb.entities()) es.push_back(cos_d(q, embedder.embed(e.name + ": " + e.description)));
  std::vector<double> rs;
  for (const Relation& r : kb.relations()) {
    rs.push_back(cos_d(q, embedder.embed(kb.entities()[r.head.value].name + " " + r.description + " " +
                                         kb.entities()[r.tail.value].name)));
  }

  constexpr double kAbsent = -1e300;
  std::vector<double> ebest(ne, kAbsent);
  std::vector<double> rbest(nr, kAbsent);
  const auto re = ranked(es);
  const auto rr = ranked(rs);
  const std::size_t seeds = std::min(k, re.size());
  for (std::size_t i = 0; i < seeds; ++i) ebest[re[i].second] = re[i].first;
  for (std::size_t i = 0; i < std::min(k, rr.size()); ++i) rbest[rr[i].second] = rr[i].first;

  if (hops > 0) {
    constexpr std::size_t kInf = static_cast<std::size_t>(-1);
    for (std::size_t i = 0; i < seeds; ++i) {
      const std::size_t seed = re[i].second;
      const double seed_score = re[i].first;
      std::vector<std::size_t> dist(ne, kInf);
      dist[seed] = 0;
      for (std::size_t level = 1; level <= hops; ++level) {
        for (const Relation& r : kb.relations()) {
          const auto h = r.head.value;
          const auto t = r.tail.value;
          if (dist[h] == level - 1 && dist[t] == kInf) dist[t] = level;
          if (dist[t] == level - 1 && dist[h] == kInf) dist[h] = level;
        }
      }
      for (std::size_t e = 0; e < ne; ++e) {
        if (dist[e] == 0 || dist[e] == kInf) continue;
        ebest[e] = std::max(ebest[e], seed_score * std::pow(decay, static_cast<double>(dist[e])));
      }
      for (std::size_t r = 0; r < nr; ++r) {
        const std::size_t near = std::min(dist[kb.relations()[r].head.value], dist[kb.relations()[r].tail.value]);
        if (near >= hops) continue;
        rbest[r] = std::max(rbest[r], seed_score * std::pow(decay, static_cast<double>(near + 1)));
      }
    }
  }

  std::vector<std::pair<double, std::size_t>> ep;
  std::vector<std::pair<double, std::size_t>> rp;
  for (std::size_t e = 0; e < ne; ++e) {
    if (ebest[e] != kAbsent) ep.emplace_back(ebest[e], e);
  }
  for (std::size_t r = 0; r < nr; ++r) {
    if (rbest[r] != kAbsent) rp.emplace_back(rbest[r], r);
  }
  const auto by_rank = [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; };
  std::sort(ep.begin(), ep.end(), by_rank);
  std::sort(rp.begin(), rp.end(), by_rank);
  for (std::size_t i = 0; i < std::min(k, ep.size()); ++i) ctx.entities.push_back(ScoredEntity{kb.entities()[ep[i].second], ep[i].first});
  for (std::size_t i = 0; i < std::min(k, rp.size()); ++i) {
    const Relation& r = kb.relations()[rp[i].second];
    ctx.relations.push_back(
        ScoredRelation{r, kb.entities()[r.head.value].name, kb.entities()[r.tail.value].name, rp[i].first});
  }
  return ctx;
}

}  // namespace graphsearch::testing

namespace graphsearch::testing {

WizeFixture::WizeFixture()
    : kb([] {
        const auto corpus = load_corpus(fixture_path("wize/corpus.jsonl"));
        RuleBasedExtractor extractor;
        return build_index(corpus, BuildConfig{}, extractor).kb;
      }()),
      transcript(Transcript::load(fixture_path("wize/transcript.jsonl"))) {
  RetrieverConfig cfg;
  cfg.top_k = kTopK;
  cfg.hop_expansion = 1;
  cfg.hop_decay = 0.5;
  retriever = std::make_unique<GraphRetriever>(kb, std::make_shared<HashingEmbedder>(256), cfg);
}

SearchConfig WizeFixture::deepsearch_config() {
  SearchConfig c;
  c.budget.max_rounds = 2;
  c.budget.per_query_top_k = kTopK;
  return c;
}

}  // namespace graphsearch::testing
