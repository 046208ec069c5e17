#include "mtkit/orchestrator/http.hpp"

#include <httplib.h>

#include "mtkit/common/errors.hpp"

namespace mtkit::orchestrator {

Endpoint parse_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw InvalidInput("endpoint '" + url + "' is not an absolute URL");
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https")
    throw InvalidInput("endpoint '" + url + "' must use http or https");
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.scheme_host_port = url.substr(0, path_start);
  e.path = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (e.scheme_host_port.size() == scheme_end + 3)
    throw InvalidInput("endpoint '" + url + "' has no host");
  return e;
}

HttpResponse post_json(const std::string& url,
                       const std::map<std::string, std::string>& headers,
                       const std::string& body, std::chrono::milliseconds timeout) {
  const auto endpoint = parse_endpoint(url);
  httplib::Client client(endpoint.scheme_host_port);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);

  HttpResponse out;
  auto result = client.Post(endpoint.path, h, body, "application/json");
  if (!result) {
    out.error = httplib::to_string(result.error());
    return out;
  }
  out.status = result->status;
  out.body = result->body;
  for (const auto& [k, v] : result->headers) out.headers[k] = v;
  return out;
}

}  // namespace mtkit::orchestrator
