#include "app_config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include "graphsearch/errors.hpp"

namespace graphsearch::cli {

using nlohmann::json;

namespace {

void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    if (!known) throw ConfigError("unknown config key '" + where + "." + key + "'");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (p.empty() || path.is_absolute() || base.empty()) return path;
  return base / path;
}

RetryPolicy retry_from(const json& j, RetryPolicy r, const std::string& where) {
  allow_keys(j, where, {"attempts", "initial_backoff_ms", "multiplier", "max_backoff_ms", "timeout_ms"});
  r.attempts = j.value("attempts", r.attempts);
  r.initial_backoff = std::chrono::milliseconds(j.value("initial_backoff_ms", r.initial_backoff.count()));
  r.multiplier = j.value("multiplier", r.multiplier);
  r.max_backoff = std::chrono::milliseconds(j.value("max_backoff_ms", r.max_backoff.count()));
  r.per_attempt_timeout = std::chrono::milliseconds(j.value("timeout_ms", r.per_attempt_timeout.count()));
  return r;
}

json retry_json(const RetryPolicy& r) {
  return {{"attempts", r.attempts},
          {"initial_backoff_ms", r.initial_backoff.count()},
          {"multiplier", r.multiplier},
          {"max_backoff_ms", r.max_backoff.count()},
          {"timeout_ms", r.per_attempt_timeout.count()}};
}

LlmConfig llm_from(const json& j, LlmConfig c, const std::filesystem::path& base, const std::string& where,
                   bool* enabled = nullptr) {
  if (enabled != nullptr) {
    allow_keys(j, where, {"enabled", "backend", "base_url", "model", "api_key_env", "temperature", "max_output_units",
                          "max_in_flight", "transcript", "strict_digests", "retry"});
    *enabled = j.value("enabled", *enabled);
  } else {
    allow_keys(j, where, {"backend", "base_url", "model", "api_key_env", "temperature", "max_output_units",
                          "max_in_flight", "transcript", "strict_digests", "retry"});
  }
  if (j.contains("backend")) {
    const auto b = j["backend"].get<std::string>();
    if (b == "remote") c.backend = LlmBackend::remote;
    else if (b == "scripted") c.backend = LlmBackend::scripted;
    else throw ConfigError(where + ".backend must be 'remote' or 'scripted', got '" + b + "'");
  }
  c.base_url = j.value("base_url", c.base_url);
  c.model_name = j.value("model", c.model_name);
  c.api_key_env_var = j.value("api_key_env", c.api_key_env_var);
  c.temperature = j.value("temperature", c.temperature);
  c.max_output_units = j.value("max_output_units", c.max_output_units);
  c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
  if (j.contains("transcript")) c.transcript_path = resolve(base, j["transcript"].get<std::string>()).string();
  c.strict_digests = j.value("strict_digests", c.strict_digests);
  if (j.contains("retry")) c.retry = retry_from(j["retry"], c.retry, where + ".retry");
  return c;
}

json llm_json(const LlmConfig& c) {
  return {{"backend", c.backend == LlmBackend::remote ? "remote" : "scripted"},
          {"base_url", c.base_url},
          {"model", c.model_name},
          {"api_key_env", c.api_key_env_var},
          {"temperature", c.temperature},
          {"max_output_units", c.max_output_units},
          {"max_in_flight", c.max_in_flight},
          {"transcript", c.transcript_path},
          {"strict_digests", c.strict_digests},
          {"retry", retry_json(c.retry)}};
}

}  // namespace

AppConfig::AppConfig() {
  judge.llm.api_key_env_var = "GRAPHSEARCH_JUDGE_API_KEY";
  search.budget.per_query_top_k = retriever.top_k;
}

void validate_llm_config(const LlmConfig& c, const std::string& where) {
  if (c.backend == LlmBackend::scripted && c.transcript_path.empty()) {
    throw ConfigError(where + ": scripted backend needs a transcript");
  }
  if (c.backend == LlmBackend::remote) {
    if (c.base_url.empty() || c.model_name.empty()) throw ConfigError(where + ": remote backend needs base_url and model");
    if (c.api_key_env_var.empty()) throw ConfigError(where + ": remote backend needs api_key_env");
  }
  if (c.retry.attempts < 1) throw ConfigError(where + ": retry.attempts must be >= 1");
}

void AppConfig::validate() const {
  if (chunk_size_units == 0) throw ConfigError("chunking.size_units must be >= 1");
  if (chunk_overlap_units >= chunk_size_units) throw ConfigError("chunking.overlap_units must be smaller than size_units");
  if (retriever.top_k == 0) throw ConfigError("retriever.top_k must be >= 1");
  if (!(retriever.hop_decay > 0.0 && retriever.hop_decay <= 1.0)) throw ConfigError("retriever.hop_decay must be in (0, 1]");
  if (embedder.kind == EmbedderKind::hashing && embedder.hashing_dimension == 0) {
    throw ConfigError("embedder.dimension must be >= 1");
  }
  if (embedder.kind == EmbedderKind::remote) {
    if (embedder.remote.dimension == 0 || embedder.remote.batch_size == 0) {
      throw ConfigError("embedder: remote dimension and batch_size must be >= 1");
    }
    if (embedder.remote.api_key_env_var.empty()) throw ConfigError("embedder: remote backend needs api_key_env");
  }
  if (index_parallelism == 0 || eval_parallelism == 0) throw ConfigError("parallelism bounds must be >= 1");
  search.validate();
}

AppConfig app_config_from_json(const json& j, const std::filesystem::path& base) {
  AppConfig c;
  try {
    allow_keys(j, "config",
               {"index_dir", "corpus", "chunking", "extractor", "embedder", "retriever", "llm", "judge", "search",
                "parallelism"});
    if (j.contains("index_dir")) c.index_dir = resolve(base, j["index_dir"].get<std::string>());
    if (j.contains("corpus")) c.corpus_path = resolve(base, j["corpus"].get<std::string>());
    if (j.contains("chunking")) {
      const auto& ch = j["chunking"];
      allow_keys(ch, "chunking", {"size_units", "overlap_units"});
      c.chunk_size_units = ch.value("size_units", c.chunk_size_units);
      c.chunk_overlap_units = ch.value("overlap_units", c.chunk_overlap_units);
    }
    if (j.contains("extractor")) {
      const auto e = j["extractor"].get<std::string>();
      if (e == "rule") c.extractor = ExtractorKind::rule;
      else if (e == "llm") c.extractor = ExtractorKind::llm;
      else throw ConfigError("extractor must be 'rule' or 'llm', got '" + e + "'");
    }
    if (j.contains("embedder")) {
      const auto& e = j["embedder"];
      allow_keys(e, "embedder", {"backend", "dimension", "base_url", "model", "api_key_env", "batch_size", "max_in_flight", "retry"});
      const auto b = e.value("backend", std::string("hash"));
      if (b == "hash") {
        c.embedder.kind = EmbedderKind::hashing;
        c.embedder.hashing_dimension = e.value("dimension", c.embedder.hashing_dimension);
      } else if (b == "remote") {
        c.embedder.kind = EmbedderKind::remote;
        auto& r = c.embedder.remote;
        r.dimension = e.value("dimension", r.dimension);
        r.base_url = e.value("base_url", r.base_url);
        r.model_name = e.value("model", r.model_name);
        r.api_key_env_var = e.value("api_key_env", r.api_key_env_var);
        r.batch_size = e.value("batch_size", r.batch_size);
        r.max_in_flight = e.value("max_in_flight", r.max_in_flight);
        if (e.contains("retry")) r.retry = retry_from(e["retry"], r.retry, "embedder.retry");
      } else {
        throw ConfigError("embedder.backend must be 'hash' or 'remote', got '" + b + "'");
      }
    }
    if (j.contains("retriever")) {
      const auto& r = j["retriever"];
      allow_keys(r, "retriever", {"top_k", "hop_expansion", "hop_decay"});
      c.retriever.top_k = r.value("top_k", c.retriever.top_k);
      c.retriever.hop_expansion = r.value("hop_expansion", c.retriever.hop_expansion);
      c.retriever.hop_decay = r.value("hop_decay", c.retriever.hop_decay);
    }
    c.search.budget.per_query_top_k = c.retriever.top_k;
    if (j.contains("llm")) c.llm = llm_from(j["llm"], c.llm, base, "llm");
    if (j.contains("judge")) c.judge.llm = llm_from(j["judge"], c.judge.llm, base, "judge", &c.judge.enabled);
    if (j.contains("search")) {
      const auto& s = j["search"];
      allow_keys(s, "search", {"toggles", "channel_mode", "budget"});
      if (s.contains("budget")) {
        allow_keys(s["budget"], "search.budget",
                   {"max_rounds", "max_subqueries_per_decomposition", "max_expansion_queries"});
      }
      c.search = search_config_from_json(s);
      c.search.budget.per_query_top_k = c.retriever.top_k;
    }
    if (j.contains("parallelism")) {
      const auto& p = j["parallelism"];
      allow_keys(p, "parallelism", {"index", "eval"});
      c.index_parallelism = p.value("index", c.index_parallelism);
      c.eval_parallelism = p.value("eval", c.eval_parallelism);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

AppConfig load_app_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto j = json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw ConfigError("config " + path.string() + " is not valid JSON");
  return app_config_from_json(j, path.parent_path());
}

json to_json(const AppConfig& c) {
  json embedder;
  if (c.embedder.kind == EmbedderKind::hashing) {
    embedder = {{"backend", "hash"}, {"dimension", c.embedder.hashing_dimension}};
  } else {
    const auto& r = c.embedder.remote;
    embedder = {{"backend", "remote"},       {"dimension", r.dimension},   {"base_url", r.base_url},
                {"model", r.model_name},     {"api_key_env", r.api_key_env_var}, {"batch_size", r.batch_size},
                {"max_in_flight", r.max_in_flight}, {"retry", retry_json(r.retry)}};
  }
  auto judge = llm_json(c.judge.llm);
  judge["enabled"] = c.judge.enabled;
  auto search = to_json(c.search);
  search["budget"].erase("per_query_top_k");
  return {{"index_dir", c.index_dir.string()},
          {"corpus", c.corpus_path.string()},
          {"chunking", {{"size_units", c.chunk_size_units}, {"overlap_units", c.chunk_overlap_units}}},
          {"extractor", c.extractor == ExtractorKind::rule ? "rule" : "llm"},
          {"embedder", embedder},
          {"retriever",
           {{"top_k", c.retriever.top_k}, {"hop_expansion", c.retriever.hop_expansion}, {"hop_decay", c.retriever.hop_decay}}},
          {"llm", llm_json(c.llm)},
          {"judge", judge},
          {"search", search},
          {"parallelism", {{"index", c.index_parallelism}, {"eval", c.eval_parallelism}}}};
}

}  // namespace graphsearch::cli
