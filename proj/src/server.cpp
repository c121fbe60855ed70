#include "agentmart/server.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include <fmt/format.h>

#include "httplib.h"

#include "agentmart/error.hpp"
#include "agentmart/storefront.hpp"

namespace agentmart {

namespace {

bool same_query(std::string_view a, std::string_view b) {
  auto norm = [](std::string_view s) {
    std::string out;
    for (unsigned char c : s) {
      if (std::isalnum(c)) out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
  };
  return norm(a) == norm(b);
}

void not_found(httplib::Response& res, std::string_view what) {
  res.status = 404;
  res.set_content(fmt::format("not found: {}\n", what), "text/plain");
}

std::string placeholder_svg(std::string_view label) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"272\" height=\"200\">"
      "<rect width=\"272\" height=\"200\" fill=\"#f3f3f3\"/>"
      "<text x=\"136\" y=\"104\" font-family=\"Arial\" font-size=\"14\" fill=\"#888\" "
      "text-anchor=\"middle\">{}</text></svg>",
      html_escape(label));
}

}  // namespace

ScenarioStore::ScenarioStore(std::shared_ptr<const Catalog> catalog,
                             std::vector<Scenario> scenarios)
    : catalog_(std::move(catalog)), scenarios_(std::move(scenarios)) {
  if (!catalog_) throw ValidationError("scenario store needs a catalog");
  for (std::size_t i = 0; i < scenarios_.size(); ++i) {
    validate(scenarios_[i]);
    for (const auto& l : scenarios_[i].listings) catalog_->at(l.product_id);
    if (!by_id_.emplace(scenarios_[i].scenario_id, i).second) {
      throw ValidationError(
          fmt::format("duplicate scenario id '{}' in store", scenarios_[i].scenario_id));
    }
  }
}

const Scenario* ScenarioStore::find(std::string_view scenario_id) const noexcept {
  auto it = by_id_.find(scenario_id);
  return it == by_id_.end() ? nullptr : &scenarios_[it->second];
}

BindAddress parse_bind(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw ValidationError(fmt::format("bind address '{}' must look like host:port", text));
  }
  BindAddress b;
  b.host = std::string(text.substr(0, colon));
  const auto port_text = text.substr(colon + 1);
  const auto [ptr, ec] =
      std::from_chars(port_text.data(), port_text.data() + port_text.size(), b.port);
  if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || b.port < 0 ||
      b.port > 65535) {
    throw ValidationError(fmt::format("bind address '{}' has an invalid port", text));
  }
  return b;
}

StorefrontServer::StorefrontServer(std::shared_ptr<const ScenarioStore> store,
                                   const BindAddress& bind)
    : store_(std::move(store)), server_(std::make_unique<httplib::Server>()), host_(bind.host) {
  if (!store_) throw ValidationError("storefront server needs a scenario store");
  const ScenarioStore* s = store_.get();

  server_->Get("/", [](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::string> sid;
    if (req.has_param("sid")) sid = req.get_param_value("sid");
    res.set_content(render_landing(sid ? std::optional<std::string_view>(*sid) : std::nullopt),
                    "text/html; charset=utf-8");
  });

  server_->Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("ok\n", "text/plain");
  });

  server_->Get("/search", [s](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("sid")) {
      res.status = 400;
      res.set_content("missing sid parameter\n", "text/plain");
      return;
    }
    const Scenario* sc = s->find(req.get_param_value("sid"));
    if (!sc) return not_found(res, "scenario " + req.get_param_value("sid"));
    const std::string q = req.get_param_value("q");
    if (!q.empty() && !same_query(q, sc->prompt_query) && !same_query(q, sc->category)) {
      return not_found(res, "no results for '" + q + "'");
    }
    res.set_content(render_page(*sc, s->catalog()).html, "text/html; charset=utf-8");
  });

  server_->Get(R"(/scenario/([^/]+)/structured)",
               [s](const httplib::Request& req, httplib::Response& res) {
                 const Scenario* sc = s->find(req.matches[1].str());
                 if (!sc) return not_found(res, "scenario " + req.matches[1].str());
                 const RenderedPage page = render_page(*sc, s->catalog());
                 res.set_content(structured_json(*sc, page).dump(2), "application/json");
               });

  server_->Get(R"(/assets/(.+))", [](const httplib::Request& req, httplib::Response& res) {
    res.set_content(placeholder_svg(req.matches[1].str()), "image/svg+xml");
  });

  if (bind.port == 0) {
    port_ = server_->bind_to_any_port(bind.host);
    if (port_ < 0) throw Error(fmt::format("cannot bind {}:<any>", bind.host));
  } else {
    if (!server_->bind_to_port(bind.host, bind.port)) {
      throw Error(fmt::format("cannot bind {}:{}", bind.host, bind.port));
    }
    port_ = bind.port;
  }
  thread_ = std::thread([srv = server_.get()] { srv->listen_after_bind(); });
  server_->wait_until_ready();
}

StorefrontServer::~StorefrontServer() { stop(); }

std::string StorefrontServer::base_url() const {
  return fmt::format("http://{}:{}", host_, port_);
}

void StorefrontServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

void StorefrontServer::wait() {
  if (thread_.joinable()) thread_.join();
}

std::unique_ptr<StorefrontServer> serve(std::shared_ptr<const ScenarioStore> store,
                                        const BindAddress& bind) {
  return std::make_unique<StorefrontServer>(std::move(store), bind);
}

}  // namespace agentmart
