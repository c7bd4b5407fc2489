#pragma once

// cpp-httplib backed Transport. https URLs need CPPHTTPLIB_OPENSSL_SUPPORT.

#include <memory>
#include <string>

#include <httplib.h>

#include "glider/llm_client.hpp"

namespace glider {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline std::optional<ParsedUrl> split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) return std::nullopt;
  auto path_begin = url.find('/', scheme_end + 3);
  if (path_begin == std::string::npos) return ParsedUrl{url, "/"};
  return ParsedUrl{url.substr(0, path_begin), url.substr(path_begin)};
}

class HttplibTransport : public Transport {
 public:
  Result<HttpResponse, TransportError> post(const std::string& url, const HttpHeaders& headers,
                                            const std::string& body, std::chrono::milliseconds timeout) override {
    auto parts = split_url(url);
    if (!parts) return TransportError{TransportErrorKind::Connection, 0, "malformed URL " + url};
    httplib::Client client(parts->origin);
    if (!client.is_valid()) return TransportError{TransportErrorKind::Connection, 0, "unsupported URL " + url};
    const auto sec = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(timeout - sec);
    client.set_connection_timeout(sec.count(), usec.count());
    client.set_read_timeout(sec.count(), usec.count());
    client.set_write_timeout(sec.count(), usec.count());
    httplib::Headers h;
    std::string content_type = "application/json";
    for (const auto& [k, v] : headers) {
      if (k == "Content-Type") {
        content_type = v;
      } else {
        h.emplace(k, v);
      }
    }
    auto res = client.Post(parts->path, h, body, content_type);
    if (!res) {
      auto err = res.error();
      auto kind = (err == httplib::Error::Read || err == httplib::Error::Write ||
                   err == httplib::Error::ConnectionTimeout)
                      ? TransportErrorKind::Timeout
                      : TransportErrorKind::Connection;
      return TransportError{kind, 0, httplib::to_string(err)};
    }
    return HttpResponse{res->status, res->body};
  }
};

inline std::shared_ptr<Transport> make_http_transport() { return std::make_shared<HttplibTransport>(); }

}  // namespace glider
