#pragma once

#include <chrono>
#include <map>
#include <string>

namespace mtkit::orchestrator {

struct HttpResponse {
  // 0 when no response arrived (connection refused, timeout, TLS failure).
  int status = 0;
  std::string body;
  std::map<std::string, std::string> headers;
  std::string error;
};

// POSTs a JSON body to an absolute http:// or https:// URL.
HttpResponse post_json(const std::string& url,
                       const std::map<std::string, std::string>& headers,
                       const std::string& body, std::chrono::milliseconds timeout);

struct Endpoint {
  std::string scheme_host_port;
  std::string path;
};

// Throws InvalidInput for anything but an absolute http(s) URL.
Endpoint parse_endpoint(const std::string& url);

}  // namespace mtkit::orchestrator
