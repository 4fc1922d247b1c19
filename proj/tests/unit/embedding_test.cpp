#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <random>

#include "graphsearch/embedding.hpp"
#include "graphsearch/errors.hpp"
#include "graphsearch/text.hpp"
#include "graphsearch/vector_index.hpp"
#include "test_support.hpp"

using namespace graphsearch;
using graphsearch::testing::FakeTransport;
using graphsearch::testing::TempDir;

namespace {

double norm(const Embedding& v) {
  double s = 0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

}  // namespace

TEST(HashingEmbedderTest, EmptyTextIsZeroVector) {
  HashingEmbedder e(64);
  const auto v = e.embed("");
  ASSERT_EQ(v.size(), 64u);
  EXPECT_EQ(norm(v), 0.0);
}

TEST(HashingEmbedderTest, DeterministicAndUnitNorm) {
  HashingEmbedder e(256);
  const auto a = e.embed("alpha beta");
  EXPECT_EQ(a, e.embed("alpha beta"));
  EXPECT_NEAR(norm(a), 1.0, 1e-6);
  EXPECT_NEAR(cosine(a, e.embed("alpha beta")), 1.0, 1e-12);
}

TEST(HashingEmbedderTest, BucketsMatchHandComputation) {
  HashingEmbedder e(16);
  const auto v = e.embed("Alpha alpha beta");
  Embedding expected(16, 0.0f);
  expected[text::fnv1a64("alpha") % 16] += 2.0f;
  expected[text::fnv1a64("beta") % 16] += 1.0f;
  l2_normalize(expected);
  ASSERT_EQ(v.size(), expected.size());
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_FLOAT_EQ(v[i], expected[i]);
  EXPECT_EQ(e.identity(), "hash-bow-fnv1a64/16");
}

TEST(HashingEmbedderTest, ZeroDimensionRejected) { EXPECT_THROW(HashingEmbedder(0), InvalidArgument); }

TEST(FlatIndexTest, MatchesBruteForceOracle) {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> g;
  const std::size_t dim = 8;
  FlatIndex index(dim);
  std::vector<std::vector<float>> rows;
  for (int i = 0; i < 50; ++i) {
    std::vector<float> r(dim);
    for (auto& x : r) x = g(rng);
    if (i % 10 == 0) r = rows.empty() ? r : rows.back();  // force some exact ties
    rows.push_back(r);
    index.add(r);
  }
  std::vector<float> q(dim);
  for (auto& x : q) x = g(rng);

  std::vector<std::pair<double, std::size_t>> oracle;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    long double dot = 0, qn = 0, rn = 0;
    for (std::size_t d = 0; d < dim; ++d) {
      dot += static_cast<long double>(q[d]) * rows[i][d];
      qn += static_cast<long double>(q[d]) * q[d];
      rn += static_cast<long double>(rows[i][d]) * rows[i][d];
    }
    oracle.emplace_back(static_cast<double>(dot / std::sqrt(qn * rn)), i);
  }
  std::sort(oracle.begin(), oracle.end(), [](auto& a, auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });

  const auto hits = index.search(q, 10);
  ASSERT_EQ(hits.size(), 10u);
  for (std::size_t i = 0; i < hits.size(); ++i) {
    EXPECT_EQ(hits[i].row, oracle[i].second);
    EXPECT_NEAR(hits[i].score, oracle[i].first, 1e-12);
  }
  EXPECT_EQ(index.search(q, 500).size(), 50u);
}

TEST(FlatIndexTest, ZeroQueryScoresZero) {
  FlatIndex index(2);
  index.add(std::vector<float>{1, 0});
  const auto hits = index.search(std::vector<float>{0, 0}, 1);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].score, 0.0);
}

TEST(FlatIndexTest, DimensionChecked) {
  FlatIndex index(3);
  EXPECT_THROW(index.add(std::vector<float>{1, 2}), InvalidArgument);
  EXPECT_THROW(index.search(std::vector<float>{1, 2}, 1), InvalidArgument);
}

TEST(FlatIndexTest, SidecarRoundTripAndCorruption) {
  TempDir dir;
  FlatIndex index(4);
  index.add(std::vector<float>{1, 2, 3, 4});
  index.add(std::vector<float>{-1, 0.5f, 0, 2});
  index.save(dir / "x.emb");
  EXPECT_EQ(FlatIndex::load(dir / "x.emb"), index);

  std::string bytes = graphsearch::testing::read_file(dir / "x.emb");
  graphsearch::testing::write_file(dir / "y.emb", bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(FlatIndex::load(dir / "y.emb"), StoreError);
  bytes[0] = 'X';
  graphsearch::testing::write_file(dir / "z.emb", bytes);
  EXPECT_THROW(FlatIndex::load(dir / "z.emb"), StoreError);
}

TEST(RemoteEmbedderTest, BatchesSkipEmptyAndUseEnvKey) {
  ::setenv("GS_TEST_EMBED_KEY", "secret-123", 1);
  auto transport = std::make_shared<FakeTransport>();
  transport->push(200, R"({"data":[{"index":1,"embedding":[0,2]},{"index":0,"embedding":[3,4]}]})");
  transport->push(200, R"({"data":[{"index":0,"embedding":[1,0]}]})");
  RemoteEmbedderConfig cfg;
  cfg.base_url = "http://embed.local/v1/";
  cfg.api_key_env_var = "GS_TEST_EMBED_KEY";
  cfg.dimension = 2;
  cfg.batch_size = 2;
  RemoteEmbedder e(cfg, transport, [](std::chrono::milliseconds) {});
  const std::vector<std::string> texts = {"a", "", "b", "c"};
  const auto out = e.embed_batch(texts);
  ASSERT_EQ(out.size(), 4u);
  EXPECT_FLOAT_EQ(out[0][0], 0.6f);
  EXPECT_FLOAT_EQ(out[0][1], 0.8f);
  EXPECT_EQ(out[1], (Embedding{0, 0}));
  EXPECT_EQ(out[2], (Embedding{0, 1}));
  EXPECT_EQ(out[3], (Embedding{1, 0}));
  ASSERT_EQ(transport->requests.size(), 2u);
  EXPECT_EQ(transport->requests[0].url, "http://embed.local/v1/embeddings");
  bool has_auth = false;
  for (const auto& [k, v] : transport->requests[0].headers) has_auth = has_auth || (k == "Authorization" && v == "Bearer secret-123");
  EXPECT_TRUE(has_auth);
  ::unsetenv("GS_TEST_EMBED_KEY");
}

TEST(RemoteEmbedderTest, WrongDimensionIsRetrievalError) {
  auto transport = std::make_shared<FakeTransport>();
  transport->push(200, R"({"data":[{"index":0,"embedding":[1,2,3]}]})");
  RemoteEmbedderConfig cfg;
  cfg.dimension = 2;
  RemoteEmbedder e(cfg, transport, [](std::chrono::milliseconds) {});
  EXPECT_THROW(e.embed("x"), RetrievalError);
}

TEST(RemoteEmbedderTest, ExhaustedRetriesSurfaceAsRetrievalError) {
  auto transport = std::make_shared<FakeTransport>();
  transport->push(503, "");
  transport->push(503, "");
  transport->push(503, "");
  RemoteEmbedderConfig cfg;
  cfg.dimension = 2;
  RemoteEmbedder e(cfg, transport, [](std::chrono::milliseconds) {});
  EXPECT_THROW(e.embed("x"), RetrievalError);
  EXPECT_EQ(transport->requests.size(), 3u);
}
