#include "graphsearch/embedding.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "graphsearch/errors.hpp"
#include "graphsearch/text.hpp"

namespace graphsearch {

using nlohmann::json;

void l2_normalize(Embedding& v) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * static_cast<double>(x);
  if (sq == 0.0) return;
  const double inv = 1.0 / std::sqrt(sq);
  for (float& x : v) x = static_cast<float>(static_cast<double>(x) * inv);
}

double cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw InvalidArgument("cosine of vectors with different dimensions");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    na += static_cast<double>(a[i]) * static_cast<double>(a[i]);
    nb += static_cast<double>(b[i]) * static_cast<double>(b[i]);
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

Embedding EmbeddingProvider::embed(const std::string& text) {
  auto batch = embed_batch(std::span<const std::string>(&text, 1));
  return std::move(batch.front());
}

HashingEmbedder::HashingEmbedder(std::size_t dimension) : dimension_(dimension) {
  if (dimension_ == 0) throw InvalidArgument("embedding dimension must be positive");
}

std::string HashingEmbedder::identity() const { return "hash-bow-fnv1a64/" + std::to_string(dimension_); }

std::vector<Embedding> HashingEmbedder::embed_batch(std::span<const std::string> texts) {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    Embedding v(dimension_, 0.0f);
    for (const auto& token : text::word_tokens(t)) v[text::fnv1a64(token) % dimension_] += 1.0f;
    l2_normalize(v);
    out.push_back(std::move(v));
  }
  return out;
}

RemoteEmbedder::RemoteEmbedder(RemoteEmbedderConfig config, std::shared_ptr<HttpTransport> transport, Sleeper sleep)
    : config_(std::move(config)), transport_(std::move(transport)), sleep_(std::move(sleep)), limiter_(config_.max_in_flight) {
  if (!transport_) throw InvalidArgument("remote embedder needs a transport");
  if (config_.dimension == 0) throw InvalidArgument("embedding dimension must be positive");
}

std::vector<Embedding> RemoteEmbedder::request(std::span<const std::string> texts) {
  json body{{"model", config_.model_name}, {"input", json::array()}};
  for (const auto& t : texts) body["input"].push_back(t);
  Headers headers;
  if (const auto key = api_key_from_env(config_.api_key_env_var); !key.empty()) {
    headers.emplace_back("Authorization", "Bearer " + key);
  }
  std::string url = config_.base_url;
  if (!url.empty() && url.back() == '/') url.pop_back();
  url += "/embeddings";

  HttpResponse res;
  try {
    auto permit = limiter_.acquire();
    res = post_with_retry(*transport_, url, headers, body.dump(), config_.retry, sleep_);
  } catch (const RemoteError& e) {
    throw RetrievalError(std::string("embedding request failed: ") + e.what());
  }
  const auto parsed = json::parse(res.body, nullptr, false);
  if (parsed.is_discarded() || !parsed.contains("data") || !parsed["data"].is_array() || parsed["data"].size() != texts.size()) {
    throw RetrievalError(url + ": malformed embedding response");
  }
  std::vector<Embedding> out(texts.size());
  for (std::size_t i = 0; i < parsed["data"].size(); ++i) {
    const auto& item = parsed["data"][i];
    const std::size_t index = item.contains("index") ? item["index"].get<std::size_t>() : i;
    if (index >= out.size() || !item.contains("embedding")) throw RetrievalError(url + ": malformed embedding item");
    Embedding v = item["embedding"].get<Embedding>();
    if (v.size() != config_.dimension) {
      throw RetrievalError(url + ": expected dimension " + std::to_string(config_.dimension) + ", got " + std::to_string(v.size()));
    }
    l2_normalize(v);
    out[index] = std::move(v);
  }
  return out;
}

std::vector<Embedding> RemoteEmbedder::embed_batch(std::span<const std::string> texts) {
  std::vector<Embedding> out(texts.size(), Embedding(config_.dimension, 0.0f));
  std::vector<std::string> pending;
  std::vector<std::size_t> slots;
  const auto flush = [&] {
    if (pending.empty()) return;
    auto vecs = request(pending);
    for (std::size_t i = 0; i < slots.size(); ++i) out[slots[i]] = std::move(vecs[i]);
    pending.clear();
    slots.clear();
  };
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (text::trim(texts[i]).empty()) continue;  // zero vector, never sent
    pending.push_back(texts[i]);
    slots.push_back(i);
    if (pending.size() >= std::max<std::size_t>(1, config_.batch_size)) flush();
  }
  flush();
  return out;
}

}  // namespace graphsearch
