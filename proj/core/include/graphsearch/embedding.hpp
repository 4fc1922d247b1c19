#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "graphsearch/http.hpp"

namespace graphsearch {

using Embedding = std::vector<float>;

/// Scales to unit L2 norm; a zero vector is left untouched.
void l2_normalize(Embedding& v);

double cosine(std::span<const float> a, std::span<const float> b);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dimension() const = 0;
  virtual std::string identity() const = 0;
  /// Vectors are L2-normalized; empty text maps to the zero vector.
  virtual std::vector<Embedding> embed_batch(std::span<const std::string> texts) = 0;

  Embedding embed(const std::string& text);
};

/// Network-free test embedder: lower-cased alphanumeric tokens are hashed
/// with 64-bit FNV-1a into `dimension` buckets (bucket = hash mod
/// dimension, +1 per occurrence), then L2-normalized.
class HashingEmbedder final : public EmbeddingProvider {
 public:
  explicit HashingEmbedder(std::size_t dimension = 256);

  std::size_t dimension() const override { return dimension_; }
  std::string identity() const override;
  std::vector<Embedding> embed_batch(std::span<const std::string> texts) override;

 private:
  std::size_t dimension_;
};

struct RemoteEmbedderConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model_name = "text-embedding-3-small";
  std::string api_key_env_var = "GRAPHSEARCH_EMBEDDING_API_KEY";
  std::size_t dimension = 1536;
  std::size_t batch_size = 64;
  std::size_t max_in_flight = 4;
  RetryPolicy retry;
};

/// Embeddings over the common `POST {base_url}/embeddings` JSON contract
/// ({model, input: [...]} -> {data: [{index, embedding}]}).
class RemoteEmbedder final : public EmbeddingProvider {
 public:
  RemoteEmbedder(RemoteEmbedderConfig config, std::shared_ptr<HttpTransport> transport, Sleeper sleep = default_sleeper());

  std::size_t dimension() const override { return config_.dimension; }
  std::string identity() const override { return "remote:" + config_.model_name + "/" + std::to_string(config_.dimension); }
  std::vector<Embedding> embed_batch(std::span<const std::string> texts) override;

 private:
  std::vector<Embedding> request(std::span<const std::string> texts);

  RemoteEmbedderConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  Sleeper sleep_;
  InFlightLimiter limiter_;
};

}  // namespace graphsearch
