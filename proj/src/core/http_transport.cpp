// cpp-httplib is heavy; keep it confined to this translation unit.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "judgeblender/provider.hpp"

namespace judgeblender::provider {

namespace {

// Splits "scheme://host:port/prefix" into ("scheme://host:port", "/prefix").
std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  const auto path_start =
      scheme_end == std::string::npos ? std::string::npos : base_url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {base_url, ""};
  std::string prefix = base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {base_url.substr(0, path_start), prefix};
}

}  // namespace

HttpTransport default_transport() {
  return [](const HttpRequest& request) {
    HttpResponse out;
    const auto [origin, prefix] = split_base_url(request.base_url);
    httplib::Client client(origin);
    if (!client.is_valid()) {
      out.transport_error = "unsupported base URL '" + request.base_url + "'";
      return out;
    }
    const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(request.timeout);
    client.set_connection_timeout(std::chrono::seconds(10));
    client.set_read_timeout(seconds);
    client.set_write_timeout(seconds);
    httplib::Headers headers;
    std::string content_type = "application/json";
    for (const auto& [name, value] : request.headers) {
      if (name == "Content-Type") {
        content_type = value;
      } else {
        headers.emplace(name, value);
      }
    }
    auto result = client.Post(prefix + request.path, headers, request.body, content_type);
    if (!result) {
      out.transport_error = httplib::to_string(result.error());
      return out;
    }
    out.status = result->status;
    out.body = result->body;
    return out;
  };
}

}  // namespace judgeblender::provider
