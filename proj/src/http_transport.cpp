#include "agentmart/http_transport.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <thread>

#include <fmt/format.h>

#include "httplib.h"

namespace agentmart {

namespace egress {

namespace {
std::atomic<bool> g_open{false};
std::atomic<std::size_t> g_attempts{0};
}  // namespace

bool allowed() noexcept { return g_open.load(); }

std::size_t attempts() noexcept { return g_attempts.load(); }

void check(std::string_view url) {
  g_attempts.fetch_add(1);
  if (!g_open.load()) {
    throw EgressDenied(fmt::format(
        "outbound request to '{}' refused: network egress is disabled (live=false)",
        url));
  }
}

Scope::Scope(bool open) : previous_(g_open.exchange(open)) {}

Scope::~Scope() { g_open.store(previous_); }

}  // namespace egress

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError(fmt::format("endpoint url '{}' has no scheme", url));
  }
  const auto path_begin = url.find('/', scheme_end + 3);
  if (path_begin == std::string::npos) return {url, "/"};
  return {url.substr(0, path_begin), url.substr(path_begin)};
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

HttpResponse NetworkTransport::post(const HttpRequest& request) {
  egress::check(request.url);
  const auto [base, path] = split_url(request.url);
  httplib::Client client(base);
  client.set_connection_timeout(std::chrono::seconds(30));
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  httplib::Headers headers;
  std::string content_type = "application/json";
  for (const auto& [k, v] : request.headers) {
    if (lower(k) == "content-type") {
      content_type = v;
    } else {
      headers.emplace(k, v);
    }
  }
  auto result = client.Post(path, headers, request.body, content_type);
  if (!result) {
    throw TransportError(fmt::format("POST {} failed: {}", request.url,
                                     httplib::to_string(result.error())));
  }
  return HttpResponse{result->status, result->body};
}

std::chrono::milliseconds BackoffPolicy::delay(int retry) const {
  const double ms = static_cast<double>(base.count()) *
                    std::pow(factor, std::max(0, retry - 1));
  return std::chrono::milliseconds(static_cast<std::int64_t>(
      std::min(ms, static_cast<double>(max.count()))));
}

std::string base64_encode(std::string_view bytes) {
  return httplib::detail::base64_encode(std::string(bytes));
}

Sleeper real_sleeper() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

}  // namespace agentmart
