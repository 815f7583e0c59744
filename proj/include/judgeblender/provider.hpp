#pragma once

// Text-generation backends: the chat-completion HTTP client, a deterministic
// mock, and a persistent response cache.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace judgeblender::provider {

struct Decoding {
  double temperature = 0.0;
  int max_tokens = 64;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{500};
  double multiplier = 2.0;
  // Relative jitter: each delay is scaled by a factor in [1 - jitter, 1 + jitter].
  double jitter = 0.2;
  std::chrono::milliseconds max_delay{30000};
};

// Delay before retry number `retry` (1-based). `jitter_unit` is in [-1, 1].
std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int retry,
                                        double jitter_unit);

struct MockProfile {
  enum class Kind {
    kFixed,      // always `fixed_label`
    kDigest,     // label uniform over 0-3 from the prompt digest
    kCopyGold,   // echoes an [[oracle-label:N]] marker embedded in the prompt
    kMalformed,  // non-numeric text with probability `malformed_probability`,
                 // otherwise behaves like kDigest
  };
  Kind kind = Kind::kDigest;
  int fixed_label = 0;
  double malformed_probability = 1.0;
};

enum class BackendKind { kHttp, kMock };

struct JudgeEndpoint {
  std::string endpoint_id;
  BackendKind kind = BackendKind::kHttp;
  std::string base_url;  // scheme://host[:port][/prefix]
  std::string path = "/v1/chat/completions";
  std::string model_name;
  Decoding decoding;
  std::string auth_token_env;  // empty: no Authorization header
  RetryPolicy retry;
  int max_parallel = 4;
  std::chrono::milliseconds timeout{120000};
  // Used when kind == kMock.
  std::uint64_t mock_seed = 0;
  MockProfile mock;
};

// Throws ConfigError on an invalid endpoint.
void validate(const JudgeEndpoint& endpoint);

struct RawCompletion {
  std::string text;
  std::chrono::duration<double> latency{0.0};
  bool from_cache = false;
  int attempts = 1;
};

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  // Must be safe to call concurrently.
  virtual RawCompletion complete(const JudgeEndpoint& endpoint, const std::string& prompt) = 0;
};

// Pure function of (seed, profile, prompt).
RawCompletion mock_complete(std::uint64_t seed, const MockProfile& profile,
                            std::string_view prompt);

// The marker the copy-gold profile echoes.
std::string oracle_marker(int label);

class MockBackend final : public CompletionBackend {
 public:
  RawCompletion complete(const JudgeEndpoint& endpoint, const std::string& prompt) override;
};

struct HttpRequest {
  std::string base_url;
  std::string path;
  std::string body;
  std::vector<std::pair<std::string, std::string>> headers;
  std::chrono::milliseconds timeout{120000};
};

struct HttpResponse {
  int status = 0;  // 0 means the transport failed; see `transport_error`
  std::string body;
  std::string transport_error;
};

using HttpTransport = std::function<HttpResponse(const HttpRequest&)>;
using Sleeper = std::function<void(std::chrono::milliseconds)>;

// cpp-httplib transport; supports http and https.
HttpTransport default_transport();

std::string build_chat_request(const JudgeEndpoint& endpoint, std::string_view prompt);
// Text of the first choice. Throws ProviderError(kMalformed).
std::string parse_chat_response(std::string_view body);

// Chat-completion client with retries on transport errors, 5xx and 429.
class HttpChatBackend final : public CompletionBackend {
 public:
  explicit HttpChatBackend(HttpTransport transport = default_transport(),
                           Sleeper sleeper = {}, std::uint64_t jitter_seed = 0x5eed);

  RawCompletion complete(const JudgeEndpoint& endpoint, const std::string& prompt) override;

 private:
  double next_jitter();

  HttpTransport transport_;
  Sleeper sleeper_;
  std::mutex rng_mutex_;
  std::uint64_t rng_state_;
};

// Backend for the endpoint's kind.
std::unique_ptr<CompletionBackend> make_backend(const JudgeEndpoint& endpoint);

// One-shot call through a fresh backend for the endpoint.
RawCompletion complete(const JudgeEndpoint& endpoint, const std::string& prompt);

std::string sha256_hex(std::string_view data);

// Digest over model, decoding parameters and the full prompt.
std::string cache_key(const JudgeEndpoint& endpoint, std::string_view prompt);

struct CacheEntry {
  std::string key;
  std::string model;
  std::string prompt_digest;
  std::string text;
  std::string created_at;  // ISO-8601 UTC
};

// Append-only JSONL cache with an in-memory index. Reads may run concurrently;
// writes are serialized.
class ResponseCache {
 public:
  // In-memory only.
  ResponseCache() = default;
  // Loads existing entries from `path` (created if absent). A torn final line
  // is cut from the file; any other malformed line raises CacheError.
  explicit ResponseCache(std::string path);

  ResponseCache(const ResponseCache&) = delete;
  ResponseCache& operator=(const ResponseCache&) = delete;

  std::optional<std::string> lookup(const std::string& key) const;
  // First write for a key wins. Throws CacheError if the file append fails.
  void store(const CacheEntry& entry);

  std::size_t size() const;
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, std::string> index_;
};

// Cache hit: stored text, from_cache = true, no backend call. Miss: delegates to
// the backend and stores the result.
RawCompletion cached_complete(ResponseCache& cache, CompletionBackend& backend,
                              const JudgeEndpoint& endpoint, const std::string& prompt);

}  // namespace judgeblender::provider
