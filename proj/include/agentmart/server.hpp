#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "agentmart/catalog.hpp"
#include "agentmart/scenario.hpp"

namespace httplib {
class Server;
}

namespace agentmart {

// Immutable once built; shared read-only by all request handlers.
class ScenarioStore {
 public:
  ScenarioStore(std::shared_ptr<const Catalog> catalog, std::vector<Scenario> scenarios);

  const Catalog& catalog() const noexcept { return *catalog_; }
  const Scenario* find(std::string_view scenario_id) const noexcept;
  std::size_t size() const noexcept { return scenarios_.size(); }

 private:
  std::shared_ptr<const Catalog> catalog_;
  std::vector<Scenario> scenarios_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
};

struct BindAddress {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
};

// "host:port"; throws ValidationError if malformed.
BindAddress parse_bind(std::string_view text);

// Running storefront service. Stops and joins its thread on destruction.
class StorefrontServer {
 public:
  StorefrontServer(std::shared_ptr<const ScenarioStore> store, const BindAddress& bind);
  ~StorefrontServer();
  StorefrontServer(const StorefrontServer&) = delete;
  StorefrontServer& operator=(const StorefrontServer&) = delete;

  const std::string& host() const noexcept { return host_; }
  int port() const noexcept { return port_; }
  std::string base_url() const;

  void stop();
  // Blocks until stop() is called from another thread.
  void wait();

 private:
  std::shared_ptr<const ScenarioStore> store_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::string host_;
  int port_ = 0;
};

// Throws Error on bind failure.
std::unique_ptr<StorefrontServer> serve(std::shared_ptr<const ScenarioStore> store,
                                        const BindAddress& bind);

}  // namespace agentmart
