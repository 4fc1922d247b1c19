#include "graphsearch/llm.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "graphsearch/errors.hpp"
#include "graphsearch/text.hpp"

namespace graphsearch {

using nlohmann::json;

std::string prompt_digest(const std::vector<ChatMessage>& messages) {
  std::uint64_t h = text::fnv1a64("");
  for (const auto& m : messages) {
    h = text::fnv1a64(to_string(m.role), h);
    h = text::fnv1a64(std::string_view("\x1e", 1), h);
    h = text::fnv1a64(m.content, h);
    h = text::fnv1a64(std::string_view("\x1f", 1), h);
  }
  return text::hex64(h);
}

RemoteLlmClient::RemoteLlmClient(LlmConfig config, std::shared_ptr<HttpTransport> transport, Sleeper sleep)
    : config_(std::move(config)), transport_(std::move(transport)), sleep_(std::move(sleep)), limiter_(config_.max_in_flight) {
  if (!transport_) throw InvalidArgument("remote LLM client needs a transport");
}

std::string RemoteLlmClient::complete(const LlmRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  json body{{"model", config_.model_name},
            {"messages", std::move(messages)},
            {"temperature", config_.temperature},
            {"max_tokens", config_.max_output_units}};

  Headers headers;
  if (const auto key = api_key_from_env(config_.api_key_env_var); !key.empty()) {
    headers.emplace_back("Authorization", "Bearer " + key);
  }
  std::string url = config_.base_url;
  if (!url.empty() && url.back() == '/') url.pop_back();
  url += "/chat/completions";

  HttpResponse res;
  {
    auto permit = limiter_.acquire();
    res = post_with_retry(*transport_, url, headers, body.dump(), config_.retry, sleep_, &last_attempts_);
  }
  const auto parsed = json::parse(res.body, nullptr, false);
  if (parsed.is_discarded() || !parsed.contains("choices") || !parsed["choices"].is_array() || parsed["choices"].empty()) {
    throw RemoteError(url + ": response without choices", res.status, false);
  }
  const auto& choice = parsed["choices"][0];
  if (!choice.contains("message") || !choice["message"].contains("content") || !choice["message"]["content"].is_string()) {
    throw RemoteError(url + ": first choice has no text content", res.status, false);
  }
  return choice["message"]["content"].get<std::string>();
}

Transcript Transcript::parse(std::string_view jsonl) {
  Transcript t;
  std::size_t line_no = 0;
  for (std::string_view line : text::split_lines(jsonl)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw FixtureError("transcript line " + std::to_string(line_no) + ": malformed JSON");
    }
    try {
      TranscriptEntry e;
      const auto name = j.at("template").get<std::string>();
      const auto id = template_from_string(name);
      if (!id) throw FixtureError("unknown template '" + name + "'");
      e.template_id = *id;
      e.ordinal = j.at("ordinal").get<std::size_t>();
      if (e.ordinal == 0) throw FixtureError("ordinal must be >= 1");
      e.response = j.at("response").get<std::string>();
      if (j.contains("prompt_digest")) e.prompt_digest = j["prompt_digest"].get<std::string>();
      if (j.contains("run")) e.run = j["run"].get<std::string>();
      t.entries_.push_back(std::move(e));
    } catch (const FixtureError& e) {
      throw FixtureError("transcript line " + std::to_string(line_no) + ": " + e.what());
    } catch (const json::exception& e) {
      throw FixtureError("transcript line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return t;
}

Transcript Transcript::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FixtureError("cannot open transcript " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void Transcript::add(TemplateId id, std::size_t ordinal, std::string response) {
  entries_.push_back(TranscriptEntry{id, ordinal, std::move(response), std::nullopt, std::nullopt});
}

std::string Transcript::to_jsonl() const {
  std::string out;
  for (const auto& e : entries_) {
    json j{{"template", to_string(e.template_id)}, {"ordinal", e.ordinal}, {"response", e.response}};
    if (e.prompt_digest) j["prompt_digest"] = *e.prompt_digest;
    if (e.run) j["run"] = *e.run;
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

ScriptedLlmClient::ScriptedLlmClient(Transcript transcript, std::string run, bool strict_digests) : strict_(strict_digests) {
  // Run-scoped entries win over unscoped ones for the same key.
  for (const auto& e : transcript.entries()) {
    if (e.run && *e.run != run) continue;
    const auto key = std::make_pair(e.template_id, e.ordinal);
    auto it = responses_.find(key);
    if (it == responses_.end()) {
      responses_.emplace(key, e);
    } else if (e.run && !it->second.run) {
      it->second = e;
    }
  }
}

std::string ScriptedLlmClient::complete(const LlmRequest& request) {
  std::lock_guard lock(mu_);
  const std::size_t ordinal = ++cursors_[request.template_id];
  ++calls_;
  auto it = responses_.find({request.template_id, ordinal});
  if (it == responses_.end()) {
    throw FixtureError("transcript exhausted: no response for " + std::string(to_string(request.template_id)) + " #" +
                       std::to_string(ordinal));
  }
  if (strict_ && it->second.prompt_digest) {
    const std::string actual = prompt_digest(request.messages);
    if (actual != *it->second.prompt_digest) {
      throw FixtureError("prompt digest mismatch for " + std::string(to_string(request.template_id)) + " #" +
                         std::to_string(ordinal) + ": expected " + *it->second.prompt_digest + ", actual " + actual);
    }
  }
  return it->second.response;
}

std::size_t ScriptedLlmClient::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::unique_ptr<LlmClient> make_llm_client(const LlmConfig& config, const std::string& run) {
  switch (config.backend) {
    case LlmBackend::remote:
      return std::make_unique<RemoteLlmClient>(config, make_http_transport());
    case LlmBackend::scripted:
      if (config.transcript_path.empty()) throw ConfigError("scripted LLM backend requires a transcript path");
      return std::make_unique<ScriptedLlmClient>(Transcript::load(config.transcript_path), run, config.strict_digests);
  }
  throw ConfigError("unknown LLM backend");
}

}  // namespace graphsearch
