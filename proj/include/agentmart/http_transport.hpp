#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "agentmart/error.hpp"

namespace agentmart {

// Process-wide outbound network gate. Closed by default; only a run started
// with live=true opens it, and only for its own duration.
namespace egress {

bool allowed() noexcept;
// Number of outbound calls attempted since process start, allowed or not.
std::size_t attempts() noexcept;
// Counts the attempt, then throws EgressDenied unless the gate is open.
void check(std::string_view url);

class Scope {
 public:
  explicit Scope(bool open);
  ~Scope();
  Scope(const Scope&) = delete;
  Scope& operator=(const Scope&) = delete;

 private:
  bool previous_;
};

}  // namespace egress

class TransportError : public Error {
 public:
  using Error::Error;
};

// A response arrived but with a failing status code.
class HttpStatusError : public TransportError {
 public:
  HttpStatusError(const std::string& what, int status)
      : TransportError(what), status_(status) {}
  int status() const noexcept { return status_; }
  // Rate limiting and server-side failures are worth retrying.
  bool retryable() const noexcept { return status_ == 429 || status_ >= 500; }

 private:
  int status_;
};

struct HttpRequest {
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  // Throws TransportError when no HTTP response was obtained.
  virtual HttpResponse post(const HttpRequest& request) = 0;
};

// HTTPS/HTTP client honoring the egress gate.
class NetworkTransport final : public HttpTransport {
 public:
  explicit NetworkTransport(std::chrono::seconds timeout = std::chrono::seconds(120))
      : timeout_(timeout) {}
  HttpResponse post(const HttpRequest& request) override;

 private:
  std::chrono::seconds timeout_;
};

struct BackoffPolicy {
  std::chrono::milliseconds base{1000};
  double factor = 2.0;
  std::chrono::milliseconds max{60000};

  // Delay before retry number `retry` (1-based).
  std::chrono::milliseconds delay(int retry) const;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;
Sleeper real_sleeper();

std::string base64_encode(std::string_view bytes);

}  // namespace agentmart
