#include "judgeblender/provider.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <sstream>
#include <thread>

#include "judgeblender/error.hpp"
#include "json.hpp"

namespace judgeblender::provider {

namespace {

using json = nlohmann::json;

constexpr std::string_view kOracleOpen = "[[oracle-label:";

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::array<unsigned char, 32> sha256_raw(std::string_view data) {
  std::array<unsigned char, 32> out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != out.size()) {
    throw Error(ErrorKind::kData, "SHA-256 digest failed");
  }
  return out;
}

std::uint64_t read_u64(const std::array<unsigned char, 32>& d, std::size_t offset) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < 8; ++i) v = (v << 8) | d[offset + i];
  return v;
}

std::string now_iso8601() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int retry,
                                        double jitter_unit) {
  const double base = static_cast<double>(policy.base_delay.count()) *
                      std::pow(policy.multiplier, std::max(0, retry - 1));
  const double jittered = base * (1.0 + policy.jitter * std::clamp(jitter_unit, -1.0, 1.0));
  const double capped = std::min(jittered, static_cast<double>(policy.max_delay.count()));
  return std::chrono::milliseconds(static_cast<long long>(std::max(0.0, capped)));
}

void validate(const JudgeEndpoint& endpoint) {
  if (endpoint.endpoint_id.empty()) throw ConfigError("endpoint id must not be empty");
  const std::string where = "endpoint '" + endpoint.endpoint_id + "': ";
  if (endpoint.decoding.temperature < 0.0 || !std::isfinite(endpoint.decoding.temperature)) {
    throw ConfigError(where + "temperature must be >= 0");
  }
  if (endpoint.decoding.max_tokens <= 0) throw ConfigError(where + "max_tokens must be positive");
  if (endpoint.retry.max_attempts < 1) throw ConfigError(where + "retry attempts must be >= 1");
  if (endpoint.max_parallel < 1) throw ConfigError(where + "max_parallel must be >= 1");
  if (endpoint.kind == BackendKind::kHttp) {
    if (endpoint.base_url.find("://") == std::string::npos) {
      throw ConfigError(where + "base_url must look like scheme://host[:port]");
    }
    if (endpoint.model_name.empty()) throw ConfigError(where + "model name must not be empty");
  } else {
    const auto& m = endpoint.mock;
    if (m.kind == MockProfile::Kind::kFixed && (m.fixed_label < 0 || m.fixed_label > 3)) {
      throw ConfigError(where + "fixed mock label must be in 0-3");
    }
    if (m.malformed_probability < 0.0 || m.malformed_probability > 1.0) {
      throw ConfigError(where + "malformed probability must be in [0, 1]");
    }
  }
}

std::string oracle_marker(int label) {
  return std::string(kOracleOpen) + std::to_string(label) + "]]";
}

RawCompletion mock_complete(std::uint64_t seed, const MockProfile& profile,
                            std::string_view prompt) {
  RawCompletion out;
  const auto digest_label = [&] {
    std::string material = std::to_string(seed);
    material += '\x1f';
    material.append(prompt);
    return sha256_raw(material);
  };
  switch (profile.kind) {
    case MockProfile::Kind::kFixed:
      out.text = std::to_string(profile.fixed_label);
      break;
    case MockProfile::Kind::kDigest:
      out.text = std::to_string(read_u64(digest_label(), 0) % 4);
      break;
    case MockProfile::Kind::kCopyGold: {
      const auto pos = prompt.rfind(kOracleOpen);
      if (pos != std::string_view::npos) {
        const auto start = pos + kOracleOpen.size();
        const auto end = prompt.find("]]", start);
        if (end != std::string_view::npos) {
          out.text = std::string(prompt.substr(start, end - start));
          break;
        }
      }
      out.text = "No reference grade is available.";
      break;
    }
    case MockProfile::Kind::kMalformed: {
      const auto d = digest_label();
      // 53-bit uniform in [0, 1).
      const double u = static_cast<double>(read_u64(d, 8) >> 11) * 0x1.0p-53;
      if (u < profile.malformed_probability) {
        out.text = "I cannot assess the relevance of this passage.";
      } else {
        out.text = std::to_string(read_u64(d, 0) % 4);
      }
      break;
    }
  }
  return out;
}

RawCompletion MockBackend::complete(const JudgeEndpoint& endpoint, const std::string& prompt) {
  return mock_complete(endpoint.mock_seed, endpoint.mock, prompt);
}

std::string build_chat_request(const JudgeEndpoint& endpoint, std::string_view prompt) {
  json body = {
      {"model", endpoint.model_name},
      {"messages", json::array({{{"role", "user"}, {"content", std::string(prompt)}}})},
      {"temperature", endpoint.decoding.temperature},
      {"max_tokens", endpoint.decoding.max_tokens},
  };
  return body.dump();
}

std::string parse_chat_response(std::string_view body) {
  json doc = json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw ProviderError(ProviderFailure::kMalformed, "response body is not a JSON object");
  }
  const auto choices = doc.find("choices");
  if (choices == doc.end() || !choices->is_array() || choices->empty()) {
    throw ProviderError(ProviderFailure::kMalformed, "response has no choices");
  }
  const json& first = (*choices)[0];
  if (first.contains("message") && first["message"].is_object()) {
    const json& message = first["message"];
    if (message.contains("content")) {
      if (message["content"].is_string()) return message["content"].get<std::string>();
      if (message["content"].is_null()) return {};
    }
  }
  // Legacy completion shape.
  if (first.contains("text") && first["text"].is_string()) return first["text"].get<std::string>();
  throw ProviderError(ProviderFailure::kMalformed, "first choice carries no message content");
}

HttpChatBackend::HttpChatBackend(HttpTransport transport, Sleeper sleeper,
                                 std::uint64_t jitter_seed)
    : transport_(std::move(transport)),
      sleeper_(std::move(sleeper)),
      rng_state_(jitter_seed) {
  if (!sleeper_) {
    sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

double HttpChatBackend::next_jitter() {
  std::lock_guard lock(rng_mutex_);
  const std::uint64_t r = splitmix64(rng_state_);
  return static_cast<double>(r >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

RawCompletion HttpChatBackend::complete(const JudgeEndpoint& endpoint, const std::string& prompt) {
  if (prompt.empty()) throw ConfigError("prompt must not be empty");
  HttpRequest request;
  request.base_url = endpoint.base_url;
  request.path = endpoint.path;
  request.body = build_chat_request(endpoint, prompt);
  request.timeout = endpoint.timeout;
  request.headers.emplace_back("Content-Type", "application/json");
  if (!endpoint.auth_token_env.empty()) {
    const char* token = std::getenv(endpoint.auth_token_env.c_str());
    if (token == nullptr || *token == '\0') {
      throw ProviderError(ProviderFailure::kAuth,
                          "credential variable '" + endpoint.auth_token_env + "' is not set");
    }
    request.headers.emplace_back("Authorization", std::string("Bearer ") + token);
  }

  const auto started = std::chrono::steady_clock::now();
  std::vector<std::string> causes;
  const int max_attempts = std::max(1, endpoint.retry.max_attempts);
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    const HttpResponse response = transport_(request);
    const std::string tag = "attempt " + std::to_string(attempt) + ": ";
    if (response.status == 0) {
      causes.push_back(tag + "transport error: " + response.transport_error);
    } else if (response.status >= 200 && response.status < 300) {
      RawCompletion out;
      out.text = parse_chat_response(response.body);
      out.attempts = attempt;
      out.latency = std::chrono::steady_clock::now() - started;
      return out;
    } else if (response.status == 401 || response.status == 403) {
      throw ProviderError(ProviderFailure::kAuth,
                          endpoint.endpoint_id + ": authentication rejected (HTTP " +
                              std::to_string(response.status) + ")",
                          {tag + "HTTP " + std::to_string(response.status)}, attempt);
    } else if (response.status == 429 || response.status >= 500) {
      causes.push_back(tag + "HTTP " + std::to_string(response.status));
    } else {
      throw ProviderError(ProviderFailure::kHttp,
                          endpoint.endpoint_id + ": HTTP " + std::to_string(response.status) +
                              ": " + response.body.substr(0, 200),
                          {tag + "HTTP " + std::to_string(response.status)}, attempt);
    }
    if (attempt < max_attempts) sleeper_(backoff_delay(endpoint.retry, attempt, next_jitter()));
  }
  std::string message = endpoint.endpoint_id + ": request failed after " +
                        std::to_string(max_attempts) + " attempt(s)";
  for (const auto& c : causes) message += "\n  caused by " + c;
  throw ProviderError(ProviderFailure::kNetwork, message, std::move(causes), max_attempts);
}

std::unique_ptr<CompletionBackend> make_backend(const JudgeEndpoint& endpoint) {
  if (endpoint.kind == BackendKind::kMock) return std::make_unique<MockBackend>();
  return std::make_unique<HttpChatBackend>();
}

RawCompletion complete(const JudgeEndpoint& endpoint, const std::string& prompt) {
  if (prompt.empty()) throw ConfigError("prompt must not be empty");
  return make_backend(endpoint)->complete(endpoint, prompt);
}

std::string sha256_hex(std::string_view data) {
  static constexpr char kHex[] = "0123456789abcdef";
  const auto d = sha256_raw(data);
  std::string out;
  out.reserve(64);
  for (unsigned char c : d) {
    out += kHex[c >> 4];
    out += kHex[c & 0xF];
  }
  return out;
}

std::string cache_key(const JudgeEndpoint& endpoint, std::string_view prompt) {
  std::string material = "model\x1f" + endpoint.model_name;
  material += "\x1ftemperature\x1f" + format_double(endpoint.decoding.temperature);
  material += "\x1fmax_tokens\x1f" + std::to_string(endpoint.decoding.max_tokens);
  if (endpoint.kind == BackendKind::kMock) {
    const auto& m = endpoint.mock;
    material += "\x1fmock\x1f" + std::to_string(static_cast<int>(m.kind)) + "\x1f" +
                std::to_string(m.fixed_label) + "\x1f" + format_double(m.malformed_probability) +
                "\x1f" + std::to_string(endpoint.mock_seed);
  }
  material += "\x1fprompt\x1f";
  material.append(prompt);
  return sha256_hex(material);
}

ResponseCache::ResponseCache(std::string path) : path_(std::move(path)) {
  std::string data;
  {
    std::ifstream in(path_, std::ios::binary);
    if (in) {
      std::ostringstream ss;
      ss << in.rdbuf();
      data = ss.str();
    } else if (std::filesystem::exists(path_)) {
      throw CacheError("cannot read cache file '" + path_ + "'");
    }
  }
  std::size_t pos = 0;
  std::size_t line_no = 0;
  std::optional<std::size_t> torn_at;
  while (pos < data.size()) {
    const std::size_t line_start = pos;
    std::size_t end = data.find('\n', pos);
    const bool terminated = end != std::string::npos;
    if (!terminated) end = data.size();
    const std::string_view line(data.data() + pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (line.empty()) continue;
    json entry = json::parse(line, nullptr, false);
    if (entry.is_discarded() || !entry.is_object() || !entry.contains("key") ||
        !entry.contains("text") || !entry["key"].is_string() || !entry["text"].is_string()) {
      if (!terminated) {
        torn_at = line_start;  // torn final write
        break;
      }
      throw CacheError("cache file '" + path_ + "' line " + std::to_string(line_no) +
                       " is not a cache entry");
    }
    index_.try_emplace(entry["key"].get<std::string>(), entry["text"].get<std::string>());
  }
  if (torn_at) {
    std::error_code ec;
    std::filesystem::resize_file(path_, *torn_at, ec);
    if (ec) throw CacheError("cannot drop torn line from cache file '" + path_ + "': " + ec.message());
    data.resize(*torn_at);
  }
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw CacheError("cannot open cache file '" + path_ + "' for append");
  if (!data.empty() && data.back() != '\n') {
    out_ << '\n';
    out_.flush();
  }
}

std::optional<std::string> ResponseCache::lookup(const std::string& key) const {
  std::shared_lock lock(mutex_);
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::store(const CacheEntry& entry) {
  std::unique_lock lock(mutex_);
  if (!index_.try_emplace(entry.key, entry.text).second) return;
  if (path_.empty()) return;
  const json line = {{"key", entry.key},
                     {"model", entry.model},
                     {"prompt_digest", entry.prompt_digest},
                     {"text", entry.text},
                     {"created_at", entry.created_at}};
  out_ << line.dump() << '\n';
  out_.flush();
  if (!out_) throw CacheError("append to cache file '" + path_ + "' failed");
}

std::size_t ResponseCache::size() const {
  std::shared_lock lock(mutex_);
  return index_.size();
}

RawCompletion cached_complete(ResponseCache& cache, CompletionBackend& backend,
                              const JudgeEndpoint& endpoint, const std::string& prompt) {
  const std::string key = cache_key(endpoint, prompt);
  if (auto hit = cache.lookup(key)) {
    RawCompletion out;
    out.text = std::move(*hit);
    out.from_cache = true;
    out.attempts = 0;
    return out;
  }
  RawCompletion out = backend.complete(endpoint, prompt);
  cache.store(CacheEntry{key, endpoint.model_name, sha256_hex(prompt), out.text, now_iso8601()});
  return out;
}

}  // namespace judgeblender::provider
