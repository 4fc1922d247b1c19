#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <memory>
#include <semaphore>
#include <string>
#include <utility>
#include <vector>

namespace graphsearch {

using Headers = std::vector<std::pair<std::string, std::string>>;

/// status == 0 means the request never produced an HTTP response.
struct HttpResponse {
  int status = 0;
  std::string body;
  std::string error;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const std::string& url, const Headers& headers, const std::string& body,
                            std::chrono::milliseconds timeout) = 0;
};

/// cpp-httplib backed transport; https requires OpenSSL at build time.
std::shared_ptr<HttpTransport> make_http_transport();

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{8000};
  std::chrono::milliseconds per_attempt_timeout{60000};
};

/// Transport failures, 408, 429 and 5xx.
bool is_retriable_status(int status);

using Sleeper = std::function<void(std::chrono::milliseconds)>;

Sleeper default_sleeper();

/// Posts until a 2xx response or the policy is exhausted. Non-retriable
/// statuses fail immediately. Throws RemoteError; `attempts_used` reports
/// how many requests were issued.
HttpResponse post_with_retry(HttpTransport& transport, const std::string& url, const Headers& headers,
                             const std::string& body, const RetryPolicy& policy, const Sleeper& sleep = default_sleeper(),
                             int* attempts_used = nullptr);

/// Caps concurrent in-flight remote requests.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(std::size_t limit) : slots_(static_cast<std::ptrdiff_t>(limit == 0 ? 1 : limit)) {}

  class Permit {
   public:
    explicit Permit(InFlightLimiter& l) : limiter_(&l) { limiter_->slots_.acquire(); }
    ~Permit() { limiter_->slots_.release(); }
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;

   private:
    InFlightLimiter* limiter_;
  };

  Permit acquire() { return Permit(*this); }

 private:
  std::counting_semaphore<1 << 16> slots_;
};

/// Reads an API key from the named environment variable; empty when unset.
std::string api_key_from_env(const std::string& var);

}  // namespace graphsearch
