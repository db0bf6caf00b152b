#include <algorithm>
#include <cctype>

#include "phishintent/backend.hpp"

#ifdef PHISHINTENT_WITH_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

namespace phishintent {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw TransportError("endpoint '" + url + "' has no scheme");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttplibTransport final : public HttpTransport {
 public:
  HttpResponse post(const HttpRequest& request) override {
    const SplitUrl url = split_url(request.url);
#ifndef PHISHINTENT_WITH_OPENSSL
    if (url.origin.rfind("https://", 0) == 0) {
      throw TransportError("https endpoints need a build with OpenSSL support");
    }
#endif
    httplib::Client client(url.origin);
    const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(request.timeout);
    const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(
        request.timeout - seconds);
    client.set_connection_timeout(seconds.count(), static_cast<time_t>(micros.count()));
    client.set_read_timeout(seconds.count(), static_cast<time_t>(micros.count()));
    client.set_write_timeout(seconds.count(), static_cast<time_t>(micros.count()));

    httplib::Headers headers;
    std::string content_type = "application/json";
    for (const auto& [name, value] : request.headers) {
      if (name == "Content-Type") {
        content_type = value;
        continue;
      }
      headers.emplace(name, value);
    }

    auto result = client.Post(url.path, headers, request.body, content_type);
    if (!result) {
      throw TransportError("request to " + url.origin + " failed: " +
                           httplib::to_string(result.error()));
    }
    HttpResponse response;
    response.status = result->status;
    response.body = result->body;
    for (const auto& [name, value] : result->headers) {
      std::string lower = name;
      std::transform(lower.begin(), lower.end(), lower.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      response.headers.emplace(std::move(lower), value);
    }
    return response;
  }
};

}  // namespace

std::shared_ptr<HttpTransport> default_transport() {
  return std::make_shared<HttplibTransport>();
}

}  // namespace phishintent
