#include "graphsearch/http.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "graphsearch/errors.hpp"

namespace graphsearch {
namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw InvalidArgument("URL without scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttplibTransport final : public HttpTransport {
 public:
  HttpResponse post(const std::string& url, const Headers& headers, const std::string& body,
                    std::chrono::milliseconds timeout) override {
    const SplitUrl parts = split_url(url);
    httplib::Client client(parts.origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(parts.path, h, body, "application/json");
    if (!res) return HttpResponse{0, {}, httplib::to_string(res.error())};
    return HttpResponse{res->status, res->body, {}};
  }
};

}  // namespace

std::shared_ptr<HttpTransport> make_http_transport() { return std::make_shared<HttplibTransport>(); }

bool is_retriable_status(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }

Sleeper default_sleeper() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

HttpResponse post_with_retry(HttpTransport& transport, const std::string& url, const Headers& headers,
                             const std::string& body, const RetryPolicy& policy, const Sleeper& sleep,
                             int* attempts_used) {
  const int attempts = std::max(1, policy.attempts);
  auto backoff = policy.initial_backoff;
  HttpResponse last;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    if (attempts_used) *attempts_used = attempt;
    last = transport.post(url, headers, body, policy.per_attempt_timeout);
    if (last.status >= 200 && last.status < 300) return last;
    if (!is_retriable_status(last.status)) {
      throw RemoteError(url + ": HTTP " + std::to_string(last.status) + ": " + last.body.substr(0, 512), last.status, false);
    }
    if (attempt < attempts) {
      if (sleep) sleep(backoff);
      backoff = std::min(policy.max_backoff,
                         std::chrono::milliseconds(static_cast<long long>(static_cast<double>(backoff.count()) * policy.multiplier)));
    }
  }
  const std::string detail = last.status == 0 ? last.error : "HTTP " + std::to_string(last.status);
  throw RemoteError(url + ": giving up after " + std::to_string(attempts) + " attempts (" + detail + ")", last.status, true);
}

std::string api_key_from_env(const std::string& var) {
  if (var.empty()) return {};
  const char* v = std::getenv(var.c_str());
  return v ? std::string(v) : std::string();
}

}  // namespace graphsearch
