#pragma once

// Shared fixtures: scratch directories, a scripted HTTP transport, and a
// small HTML reader that recovers the product grid from a rendered page.

#include <chrono>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "agentmart/catalog.hpp"
#include "agentmart/http_transport.hpp"

namespace testing_support {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("agentmart-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline const agentmart::Catalog& bundled_catalog() {
  static const agentmart::Catalog catalog =
      agentmart::load_catalog(agentmart::default_catalog_path());
  return catalog;
}

// Replays canned responses in order and records every request. A response
// with status < 0 makes post() throw TransportError instead.
class ScriptedTransport final : public agentmart::HttpTransport {
 public:
  void push(int status, std::string body) {
    std::lock_guard lock(mu_);
    script_.push_back({status, std::move(body)});
  }

  agentmart::HttpResponse post(const agentmart::HttpRequest& request) override {
    std::lock_guard lock(mu_);
    requests_.push_back(request);
    if (script_.empty()) throw agentmart::TransportError("script exhausted");
    auto r = script_.front();
    script_.pop_front();
    if (r.status < 0) throw agentmart::TransportError("connection reset");
    return r;
  }

  std::vector<agentmart::HttpRequest> requests() const {
    std::lock_guard lock(mu_);
    return requests_;
  }

 private:
  mutable std::mutex mu_;
  std::deque<agentmart::HttpResponse> script_;
  std::vector<agentmart::HttpRequest> requests_;
};

struct RecordingSleeper {
  std::shared_ptr<std::vector<std::chrono::milliseconds>> delays =
      std::make_shared<std::vector<std::chrono::milliseconds>>();

  agentmart::Sleeper sleeper() const {
    return [d = delays](std::chrono::milliseconds ms) { d->push_back(ms); };
  }
};

// What a shopper sees on one card, recovered from markup alone.
struct ParsedCard {
  int row = 0;
  int column = 0;
  std::string product_id;
  std::string title;
  std::string price;
  std::string rating;
  std::string reviews;
  std::vector<std::string> badges;
};

inline std::string unescape(std::string s) {
  static const std::vector<std::pair<std::string, std::string>> entities = {
      {"&lt;", "<"}, {"&gt;", ">"}, {"&quot;", "\""}, {"&#39;", "'"}, {"&amp;", "&"}};
  for (const auto& [from, to] : entities) {
    for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos;) {
      s.replace(pos, from.size(), to);
      pos += to.size();
    }
  }
  return s;
}

inline std::string first_match(const std::string& text, const std::regex& re) {
  std::smatch m;
  return std::regex_search(text, m, re) ? unescape(m[1].str()) : std::string{};
}

inline std::vector<ParsedCard> parse_cards(const std::string& html) {
  static const std::regex card_re(
      R"re(<div class="product-card" data-row="(\d)" data-col="(\d)" data-product-id="([^"]*)">)re");
  static const std::regex title_re(R"re(<div class="product-title">([^<]*)</div>)re");
  static const std::regex price_re(R"re(<div class="product-price">([^<]*)</div>)re");
  static const std::regex rating_re(R"re(<span class="rating">([^<]*)</span>)re");
  static const std::regex reviews_re(R"re(<span class="reviews">([^<]*)</span>)re");
  static const std::regex badge_re(R"re(<span class="badge [a-z-]+">([^<]*)</span>)re");

  std::vector<std::size_t> starts;
  std::vector<std::smatch> heads;
  for (auto it = std::sregex_iterator(html.begin(), html.end(), card_re);
       it != std::sregex_iterator(); ++it) {
    starts.push_back(static_cast<std::size_t>(it->position(0)));
    heads.push_back(*it);
  }
  std::vector<ParsedCard> cards;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const std::size_t end = i + 1 < starts.size() ? starts[i + 1] : html.size();
    const std::string body = html.substr(starts[i], end - starts[i]);
    ParsedCard c;
    c.row = std::stoi(heads[i][1].str());
    c.column = std::stoi(heads[i][2].str());
    c.product_id = unescape(heads[i][3].str());
    c.title = first_match(body, title_re);
    c.price = first_match(body, price_re);
    c.rating = first_match(body, rating_re);
    c.reviews = first_match(body, reviews_re);
    for (auto it = std::sregex_iterator(body.begin(), body.end(), badge_re);
         it != std::sregex_iterator(); ++it) {
      c.badges.push_back(unescape((*it)[1].str()));
    }
    cards.push_back(std::move(c));
  }
  return cards;
}

}  // namespace testing_support
