#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "graphsearch/errors.hpp"
#include "graphsearch/indexer.hpp"
#include "graphsearch/llm.hpp"
#include "test_support.hpp"

using namespace graphsearch;

namespace {

Document ten_unit_doc() { return Document{"d", "", "u0 u1 u2 u3 u4 u5 u6 u7 u8 u9"}; }

ChunkingOptions sized(std::size_t size, std::size_t overlap) {
  ChunkingOptions o;
  o.size_units = size;
  o.overlap_units = overlap;
  return o;
}

Chunk chunk_of(const std::string& text) { return Chunk{ChunkId{0}, "d", 0, text, text::whitespace_units(text).size()}; }

}  // namespace

TEST(Chunking, TenUnitsSizeFourNoOverlap) {
  const auto chunks = chunk_document(ten_unit_doc(), sized(4, 0));
  ASSERT_EQ(chunks.size(), 3u);
  EXPECT_EQ(chunks[0].unit_count(), 4u);
  EXPECT_EQ(chunks[1].unit_count(), 4u);
  EXPECT_EQ(chunks[2].unit_count(), 2u);
  EXPECT_EQ(chunks[0].text, "u0 u1 u2 u3");
  EXPECT_EQ(chunks[2].text, "u8 u9");
}

TEST(Chunking, TenUnitsSizeFourOverlapOne) {
  const auto chunks = chunk_document(ten_unit_doc(), sized(4, 1));
  std::vector<std::size_t> starts;
  for (const auto& c : chunks) starts.push_back(c.unit_begin);
  EXPECT_EQ(starts, (std::vector<std::size_t>{0, 3, 6, 9}));
  EXPECT_EQ(chunks.back().unit_end, 10u);
}

TEST(Chunking, DefaultSizeIs400) { EXPECT_EQ(ChunkingOptions{}.size_units, 400u); }

TEST(Chunking, PreconditionsEnforced) {
  EXPECT_THROW(chunk_document(ten_unit_doc(), sized(0, 0)), InvalidArgument);
  EXPECT_THROW(chunk_document(ten_unit_doc(), sized(4, 4)), InvalidArgument);
}

TEST(Chunking, CoverageReconstructsUnitSequence) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const Document doc{"d", "", graphsearch::testing::random_words(rng, 1, 60)};
    const std::size_t size = 1 + rng() % 9;
    const std::size_t overlap = rng() % size;
    const auto chunks = chunk_document(doc, sized(size, overlap));
    const auto units = text::whitespace_units(doc.body);
    std::vector<std::string> rebuilt;
    std::size_t covered = 0;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      const auto& c = chunks[i];
      EXPECT_EQ(c.ordinal, i);
      EXPECT_EQ(c.unit_begin, i * (size - overlap));
      // A full window shares exactly `overlap` units with its successor.
      if (i > 0 && chunks[i - 1].unit_count() == size) EXPECT_EQ(chunks[i - 1].unit_end - c.unit_begin, overlap);
      const auto cu = text::whitespace_units(c.text);
      ASSERT_EQ(cu.size(), c.unit_count());
      for (std::size_t u = c.unit_begin; u < c.unit_end; ++u) {
        if (u < covered) continue;
        const auto span = cu[u - c.unit_begin];
        rebuilt.push_back(c.text.substr(span.begin, span.end - span.begin));
      }
      covered = std::max(covered, c.unit_end);
    }
    std::vector<std::string> original;
    for (const auto& u : units) original.push_back(doc.body.substr(u.begin, u.end - u.begin));
    EXPECT_EQ(rebuilt, original);
  }
}

TEST(RuleExtractor, WardTownshipSentence) {
  RuleBasedExtractor ex;
  const auto out = ex.extract(chunk_of("Ward Township is located in Randolph County."));
  ASSERT_FALSE(out.failed);
  std::vector<std::string> names;
  for (const auto& e : out.result.entities) names.push_back(e.name);
  EXPECT_EQ(names, (std::vector<std::string>{"Ward Township", "Randolph County"}));
  ASSERT_EQ(out.result.relations.size(), 1u);
  EXPECT_EQ(out.result.relations[0].head, "Ward Township");
  EXPECT_EQ(out.result.relations[0].tail, "Randolph County");
}

TEST(RuleExtractor, EmptyChunkGivesEmptyResult) {
  RuleBasedExtractor ex;
  EXPECT_TRUE(ex.extract(chunk_of("   ")).result.empty());
  EXPECT_TRUE(ex.extract(chunk_of("all lower case words here.")).result.empty());
}

TEST(LlmExtractorTest, ScriptedTwoEntityRecord) {
  Transcript t;
  t.add(TemplateId::extract, 1, "E|Paris|type=city|capital of France\nE|France|type=country|a country in Europe");
  ScriptedLlmClient llm(t);
  LlmExtractor ex(llm);
  const auto out = ex.extract(chunk_of("Paris is the capital of France."));
  ASSERT_FALSE(out.failed);
  ASSERT_EQ(out.result.entities.size(), 2u);
  EXPECT_EQ(out.result.entities[0].name, "Paris");
  EXPECT_EQ(out.result.entities[0].properties, (Properties{{"type", "city"}}));
  EXPECT_EQ(out.result.entities[0].description, "capital of France");
  EXPECT_EQ(out.result.entities[1].name, "France");
  EXPECT_TRUE(out.result.relations.empty());
}

TEST(LlmExtractorTest, UnparseableRetriedThenEmptyWithWarnings) {
  Transcript t;
  t.add(TemplateId::extract, 1, "garbage");
  t.add(TemplateId::extract, 2, "still garbage");
  ScriptedLlmClient llm(t);
  LlmExtractor ex(llm, 2);
  const auto out = ex.extract(chunk_of("Paris is nice."));
  EXPECT_TRUE(out.failed);
  EXPECT_TRUE(out.result.empty());
  EXPECT_EQ(out.warnings.size(), 2u);
}

TEST(ExtractionRecords, RelationRecordParsed) {
  ExtractionResult r;
  std::string err;
  ASSERT_TRUE(parse_extraction_records("R|A|B|predicate=likes|A likes B", r, err)) << err;
  ASSERT_EQ(r.relations.size(), 1u);
  EXPECT_EQ(r.relations[0], (RelationCandidate{"A", "B", {{"predicate", "likes"}}, "A likes B"}));
  EXPECT_FALSE(parse_extraction_records("R||B||x", r, err));
  EXPECT_FALSE(parse_extraction_records("X|y", r, err));
}

TEST(BuildIndex, AuditPassesAndEntitiesAreDistinctNames) {
  const std::vector<Document> corpus = {
      {"d1", "", "Ward Township is located in Randolph County. Randolph County is located in the state of Illinois."}};
  RuleBasedExtractor ex;
  const auto result = build_index(corpus, BuildConfig{}, ex);
  EXPECT_TRUE(result.kb.audit().empty());
  EXPECT_EQ(result.kb.entities().size(), 3u);  // Ward Township, Randolph County, Illinois
  EXPECT_EQ(result.report.entities, 3u);
  EXPECT_EQ(result.report.relations, 2u);
  EXPECT_GE(result.report.merged_entities, 1u);
  EXPECT_TRUE(result.kb.frozen());
}

TEST(BuildIndex, DeterministicAcrossParallelism) {
  std::mt19937_64 rng(5);
  std::vector<Document> corpus;
  for (int i = 0; i < 12; ++i) {
    corpus.push_back({"doc" + std::to_string(i), "", "Alpha Beta is located in Gamma Delta. " + graphsearch::testing::random_words(rng, 5, 40) +
                                                        " Epsilon Zeta owns Eta Theta."});
  }
  RuleBasedExtractor ex;
  BuildConfig one;
  one.chunking = sized(8, 2);
  BuildConfig many = one;
  many.parallelism = 4;
  const auto a = build_index(corpus, one, ex);
  const auto b = build_index(corpus, many, ex);
  for (auto t : {KbTable::chunks, KbTable::entities, KbTable::relations}) {
    EXPECT_EQ(serialize_table(a.kb, t), serialize_table(b.kb, t));
  }
}

TEST(BuildIndex, DuplicatedBodyMergesSources) {
  const std::string body = "Ward Township is located in Randolph County.";
  const std::vector<Document> corpus = {{"a", "", body}, {"b", "", body}};
  RuleBasedExtractor ex;
  const auto result = build_index(corpus, BuildConfig{}, ex);
  const auto id = result.kb.find_entity("Ward Township");
  ASSERT_TRUE(id.has_value());
  EXPECT_EQ(result.kb.entity(*id).source_chunk_ids, (std::vector<ChunkId>{ChunkId{0}, ChunkId{1}}));
  EXPECT_EQ(result.documents, (std::vector<DocumentSummary>{{"a", 1}, {"b", 1}}));
}

TEST(BuildIndex, ChunkingFailureNamesDocument) {
  const std::vector<Document> corpus = {{"ok", "", "x y"}};
  RuleBasedExtractor ex;
  BuildConfig bad;
  bad.chunking = sized(2, 2);
  try {
    build_index(corpus, bad, ex);
    FAIL() << "expected BuildError";
  } catch (const BuildError& e) {
    EXPECT_EQ(e.doc_id(), "ok");
  }
}

TEST(Corpus, ParseRejectsMissingFields) {
  const auto docs = parse_corpus(R"({"doc_id":"a","title":"T","body":"b"})" "\n");
  ASSERT_EQ(docs.size(), 1u);
  EXPECT_EQ(docs[0].doc_id, "a");
  EXPECT_THROW(parse_corpus(R"({"title":"T"})"), Error);
}
