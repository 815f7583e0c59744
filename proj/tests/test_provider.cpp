#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"
#include "judgeblender/corpus_io.hpp"
#include "judgeblender/error.hpp"
#include "judgeblender/provider.hpp"

namespace jb = judgeblender;
namespace p = judgeblender::provider;
namespace fs = std::filesystem;
using namespace std::chrono_literals;

namespace {

p::JudgeEndpoint http_endpoint() {
  p::JudgeEndpoint e;
  e.endpoint_id = "ep";
  e.kind = p::BackendKind::kHttp;
  e.base_url = "http://127.0.0.1:1";
  e.model_name = "m";
  e.retry.max_attempts = 4;
  e.retry.base_delay = 100ms;
  return e;
}

p::JudgeEndpoint mock_endpoint(p::MockProfile::Kind kind, std::uint64_t seed = 1) {
  p::JudgeEndpoint e;
  e.endpoint_id = "mock";
  e.kind = p::BackendKind::kMock;
  e.model_name = "mock";
  e.mock_seed = seed;
  e.mock.kind = kind;
  return e;
}

std::string chat_body(const std::string& content) {
  return R"({"choices":[{"message":{"role":"assistant","content":")" + content + R"("}}]})";
}

struct Script {
  std::vector<p::HttpResponse> responses;
  std::atomic<int> calls{0};
  p::HttpTransport transport() {
    return [this](const p::HttpRequest&) {
      const int i = calls++;
      return responses[std::min<std::size_t>(i, responses.size() - 1)];
    };
  }
};

class CountingBackend final : public p::CompletionBackend {
 public:
  std::atomic<int> calls{0};
  p::RawCompletion complete(const p::JudgeEndpoint&, const std::string& prompt) override {
    ++calls;
    p::RawCompletion r;
    r.text = "echo:" + prompt;
    return r;
  }
};

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("jb_provider_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Backoff, GrowsAndCaps) {
  p::RetryPolicy r;
  r.base_delay = 100ms;
  r.multiplier = 2.0;
  r.jitter = 0.5;
  r.max_delay = 1000ms;
  EXPECT_EQ(p::backoff_delay(r, 1, 0.0), 100ms);
  EXPECT_EQ(p::backoff_delay(r, 2, 0.0), 200ms);
  EXPECT_EQ(p::backoff_delay(r, 3, 0.0), 400ms);
  EXPECT_EQ(p::backoff_delay(r, 3, 1.0), 600ms);
  EXPECT_EQ(p::backoff_delay(r, 3, -1.0), 200ms);
  EXPECT_EQ(p::backoff_delay(r, 10, 0.0), 1000ms);
}

TEST(Endpoint, Validation) {
  EXPECT_NO_THROW(p::validate(http_endpoint()));
  auto e = http_endpoint();
  e.base_url = "localhost";
  EXPECT_THROW(p::validate(e), jb::ConfigError);
  e = http_endpoint();
  e.model_name.clear();
  EXPECT_THROW(p::validate(e), jb::ConfigError);
  e = http_endpoint();
  e.retry.max_attempts = 0;
  EXPECT_THROW(p::validate(e), jb::ConfigError);
  auto m = mock_endpoint(p::MockProfile::Kind::kFixed);
  m.mock.fixed_label = 4;
  EXPECT_THROW(p::validate(m), jb::ConfigError);
}

TEST(Mock, DeterministicAndSeeded) {
  p::MockProfile digest;
  std::set<std::string> seen;
  for (int i = 0; i < 200; ++i) {
    const std::string prompt = "prompt " + std::to_string(i);
    const auto a = p::mock_complete(7, digest, prompt);
    EXPECT_EQ(a.text, p::mock_complete(7, digest, prompt).text);
    seen.insert(a.text);
  }
  EXPECT_EQ(seen, (std::set<std::string>{"0", "1", "2", "3"}));
  int differs = 0;
  for (int i = 0; i < 100; ++i) {
    const std::string prompt = "x" + std::to_string(i);
    differs += p::mock_complete(1, digest, prompt).text != p::mock_complete(2, digest, prompt).text;
  }
  EXPECT_GT(differs, 50);
}

TEST(Mock, Profiles) {
  p::MockProfile fixed{p::MockProfile::Kind::kFixed, 2, 1.0};
  EXPECT_EQ(p::mock_complete(0, fixed, "anything").text, "2");
  p::MockProfile copy{p::MockProfile::Kind::kCopyGold, 0, 1.0};
  EXPECT_EQ(p::mock_complete(0, copy, "q " + p::oracle_marker(3) + " p").text, "3");
  EXPECT_EQ(p::oracle_marker(1), "[[oracle-label:1]]");
  EXPECT_EQ(p::mock_complete(0, copy, "no marker").text.find_first_of("0123"), std::string::npos);
  p::MockProfile bad{p::MockProfile::Kind::kMalformed, 0, 1.0};
  EXPECT_EQ(p::mock_complete(0, bad, "x").text.find_first_of("0123456789"), std::string::npos);
  p::MockProfile never{p::MockProfile::Kind::kMalformed, 0, 0.0};
  p::MockProfile digest;
  EXPECT_EQ(p::mock_complete(5, never, "x").text, p::mock_complete(5, digest, "x").text);
}

TEST(Chat, RequestAndResponse) {
  auto e = http_endpoint();
  e.decoding.temperature = 0.0;
  e.decoding.max_tokens = 8;
  const auto body = p::build_chat_request(e, "hi \"there\"");
  EXPECT_NE(body.find(R"("model":"m")"), std::string::npos);
  EXPECT_NE(body.find(R"("content":"hi \"there\"")"), std::string::npos);
  EXPECT_NE(body.find(R"("max_tokens":8)"), std::string::npos);
  EXPECT_EQ(p::parse_chat_response(chat_body("2")), "2");
  for (const char* bad : {"not json", "[]", R"({"choices":[]})", R"({"choices":[{"message":{}}]})"}) {
    try {
      p::parse_chat_response(bad);
      FAIL() << bad;
    } catch (const jb::ProviderError& err) {
      EXPECT_EQ(err.failure(), jb::ProviderFailure::kMalformed);
    }
  }
}

TEST(Http, RetriesTransientFailures) {
  Script s;
  s.responses = {{0, "", "connection refused"}, {503, "busy", ""}, {429, "slow", ""},
                 {200, chat_body("1"), ""}};
  std::vector<std::chrono::milliseconds> sleeps;
  p::HttpChatBackend backend(s.transport(), [&](auto d) { sleeps.push_back(d); });
  const auto r = backend.complete(http_endpoint(), "prompt");
  EXPECT_EQ(r.text, "1");
  EXPECT_EQ(r.attempts, 4);
  EXPECT_EQ(s.calls.load(), 4);
  ASSERT_EQ(sleeps.size(), 3u);
  EXPECT_LT(sleeps[0], sleeps[2]);
}

TEST(Http, GivesUpWithCauseChain) {
  Script s;
  s.responses = {{500, "", ""}};
  p::HttpChatBackend backend(s.transport(), [](auto) {});
  try {
    backend.complete(http_endpoint(), "prompt");
    FAIL();
  } catch (const jb::ProviderError& e) {
    EXPECT_EQ(e.failure(), jb::ProviderFailure::kNetwork);
    EXPECT_EQ(e.attempts(), 4);
    ASSERT_EQ(e.causes().size(), 4u);
    EXPECT_EQ(e.causes()[0], "attempt 1: HTTP 500");
  }
  EXPECT_EQ(s.calls.load(), 4);
}

TEST(Http, ClientErrorsAreNotRetried) {
  for (int status : {401, 403, 400, 404}) {
    Script s;
    s.responses = {{status, "nope", ""}, {200, chat_body("1"), ""}};
    p::HttpChatBackend backend(s.transport(), [](auto) {});
    try {
      backend.complete(http_endpoint(), "prompt");
      FAIL() << status;
    } catch (const jb::ProviderError& e) {
      EXPECT_EQ(e.failure(), (status == 401 || status == 403) ? jb::ProviderFailure::kAuth : jb::ProviderFailure::kHttp);
    }
    EXPECT_EQ(s.calls.load(), 1) << status;
  }
}

TEST(Http, MissingCredentialFailsBeforeSending) {
  Script s;
  s.responses = {{200, chat_body("1"), ""}};
  p::HttpChatBackend backend(s.transport(), [](auto) {});
  auto e = http_endpoint();
  e.auth_token_env = "JB_TEST_TOKEN_THAT_IS_NOT_SET";
  EXPECT_THROW(backend.complete(e, "prompt"), jb::ProviderError);
  EXPECT_EQ(s.calls.load(), 0);
}

TEST(Http, LocalServerRoundTrip) {
  httplib::Server server;
  std::atomic<int> hits{0};
  std::string auth;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    if (hits++ == 0) {
      res.status = 503;
      return;
    }
    auth = req.get_header_value("Authorization");
    res.set_content(chat_body("3"), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  ::setenv("JB_TEST_TOKEN", "secret", 1);
  auto e = http_endpoint();
  e.base_url = "http://127.0.0.1:" + std::to_string(port);
  e.auth_token_env = "JB_TEST_TOKEN";
  e.timeout = 5000ms;
  p::HttpChatBackend backend(p::default_transport(), [](auto) {});
  const auto r = backend.complete(e, "prompt");
  server.stop();
  t.join();
  EXPECT_EQ(r.text, "3");
  EXPECT_EQ(r.attempts, 2);
  EXPECT_EQ(auth, "Bearer secret");
}

TEST(CacheKey, CoversModelDecodingPromptAndMockIdentity) {
  const auto e = http_endpoint();
  const auto k = p::cache_key(e, "prompt");
  EXPECT_EQ(k.size(), 64u);
  EXPECT_EQ(k, p::cache_key(e, "prompt"));
  EXPECT_NE(k, p::cache_key(e, "prompt "));
  auto other = e;
  other.model_name = "m2";
  EXPECT_NE(k, p::cache_key(other, "prompt"));
  other = e;
  other.decoding.temperature = 0.5;
  EXPECT_NE(k, p::cache_key(other, "prompt"));
  auto m1 = mock_endpoint(p::MockProfile::Kind::kDigest, 1);
  auto m2 = mock_endpoint(p::MockProfile::Kind::kDigest, 2);
  EXPECT_NE(p::cache_key(m1, "x"), p::cache_key(m2, "x"));
  EXPECT_EQ(p::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Cache, HitSkipsBackendAndPersists) {
  const auto dir = scratch("persist");
  const auto path = (dir / "cache.jsonl").string();
  const auto e = http_endpoint();
  CountingBackend backend;
  {
    p::ResponseCache cache(path);
    EXPECT_FALSE(p::cached_complete(cache, backend, e, "a").from_cache);
    const auto hit = p::cached_complete(cache, backend, e, "a");
    EXPECT_TRUE(hit.from_cache);
    EXPECT_EQ(hit.text, "echo:a");
    EXPECT_EQ(backend.calls.load(), 1);
  }
  p::ResponseCache reopened(path);
  EXPECT_EQ(reopened.size(), 1u);
  EXPECT_TRUE(p::cached_complete(reopened, backend, e, "a").from_cache);
  EXPECT_EQ(backend.calls.load(), 1);
}

TEST(Cache, FirstWriteWins) {
  p::ResponseCache cache;
  cache.store({"k", "m", "d", "first", "t"});
  cache.store({"k", "m", "d", "second", "t"});
  EXPECT_EQ(cache.lookup("k"), "first");
  EXPECT_EQ(cache.size(), 1u);
}

TEST(Cache, TornFinalLineIgnoredOtherwiseError) {
  const auto dir = scratch("torn");
  const auto path = (dir / "cache.jsonl").string();
  {
    std::ofstream out(path);
    out << R"({"key":"a","text":"1"})" << "\n" << R"({"key":"b","te)";
  }
  {
    p::ResponseCache cache(path);
    EXPECT_EQ(cache.size(), 1u);
    cache.store({"c", "m", "d", "2", "t"});
  }
  p::ResponseCache again(path);
  EXPECT_EQ(again.size(), 2u);
  EXPECT_EQ(again.lookup("c"), "2");

  {
    std::ofstream out(path);
    out << "garbage\n" << R"({"key":"a","text":"1"})" << "\n";
  }
  EXPECT_THROW(p::ResponseCache{path}, jb::CacheError);
}

TEST(Cache, ConcurrentCallers) {
  p::ResponseCache cache;
  CountingBackend backend;
  const auto e = http_endpoint();
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 50; ++i) p::cached_complete(cache, backend, e, std::to_string(i));
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(cache.size(), 50u);
  EXPECT_EQ(cache.lookup(p::cache_key(e, "7")), "echo:7");
}
