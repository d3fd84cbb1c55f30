#pragma once

// cpp-httplib backed Transport. Define CPPHTTPLIB_OPENSSL_SUPPORT and link
// OpenSSL to reach https endpoints.

#include <chrono>
#include <string>

#include <httplib.h>

#include "mcmine/providers.hpp"

namespace mcmine {

class HttpLibTransport final : public Transport {
 public:
  explicit HttpLibTransport(std::chrono::seconds timeout = std::chrono::seconds(300))
      : timeout_(timeout) {}

  HttpResponse post(const HttpRequest& request) override {
    const auto [origin, path] = split_url(request.url);
    httplib::Client client(origin);
    client.set_connection_timeout(std::chrono::seconds(30));
    client.set_read_timeout(timeout_);
    client.set_write_timeout(std::chrono::seconds(60));
    httplib::Headers headers;
    std::string content_type = "application/json";
    for (const auto& [k, v] : request.headers) {
      if (k == "Content-Type") {
        content_type = v;
      } else {
        headers.emplace(k, v);
      }
    }
    auto res = client.Post(path, headers, request.body, content_type);
    if (!res) throw TransportError("transport failure: " + httplib::to_string(res.error()));
    return HttpResponse{res->status, res->body};
  }

  /// "https://host:port/a/b" -> {"https://host:port", "/a/b"}
  static std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    const auto host_begin = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto slash = url.find('/', host_begin);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
  }

 private:
  std::chrono::seconds timeout_;
};

}  // namespace mcmine
