#include "agentmart/seller.hpp"

#include <fmt/format.h>

namespace agentmart {

namespace {

constexpr std::string_view kSellerContext =
    "Context: There is an AI agent (a vision language model) which is given a screenshot "
    "of an e-commerce website selling a particular product and it decides on the products "
    "based on the given attributes. I have the sales data on all the products including "
    "mine. I want you to act as an agent on my behalf and suggest changes to the product "
    "title so that I can increase my sales by making my product more appealing to the AI "
    "agent.";

constexpr std::string_view kFinalTitleInstruction =
    "After your analysis, end your reply with exactly one line of the form\n"
    "FINAL_TITLE: <the single new title you recommend>";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace

std::string format_sales_data(const ShareTable& sales, const Catalog& catalog) {
  std::string out;
  for (const auto& p : sales.products) {
    const Product* product = catalog.find(p.product_id);
    out += fmt::format("{}: {:.1f}% ({} of {} purchases)\n",
                       product ? product->title : p.product_id, 100.0 * p.share, p.count,
                       sales.n_valid);
  }
  return out;
}

std::string seller_prompt(std::string_view product_name, std::string_view features,
                          std::string_view sales_data) {
  return fmt::format(
      "{}\n\nMy product is {}. The product features are {}\n"
      "The sales data on the competition is below.\n{}\n"
      "It is important that the title changes you suggest align with the product features "
      "provided to you. Do not make up product features or add spurious keywords. Just use "
      "the product feature information provided.\n\n{}",
      kSellerContext, product_name, features, sales_data, kFinalTitleInstruction);
}

std::optional<std::string> parse_final_title(std::string_view reply) {
  std::optional<std::string> found;
  constexpr std::string_view kTag = "FINAL_TITLE:";
  std::size_t start = 0;
  while (start <= reply.size()) {
    auto end = reply.find('\n', start);
    if (end == std::string_view::npos) end = reply.size();
    std::string_view line = trim(reply.substr(start, end - start));
    // Tolerate markdown emphasis around the tag.
    while (!line.empty() && (line.front() == '*' || line.front() == '`')) line.remove_prefix(1);
    if (line.starts_with(kTag)) {
      std::string_view title = trim(line.substr(kTag.size()));
      while (!title.empty() && (title.front() == '*' || title.front() == '`')) {
        title.remove_prefix(1);
      }
      while (!title.empty() && (title.back() == '*' || title.back() == '`')) {
        title.remove_suffix(1);
      }
      title = trim(title);
      if (title.size() >= 2 && title.front() == '"' && title.back() == '"') {
        title = title.substr(1, title.size() - 2);
      }
      if (!title.empty()) found = std::string(title);
    }
    start = end + 1;
  }
  return found;
}

SellerReply seller_recommend(const SellerAgent& seller, const SellerRequest& request,
                             const Catalog& catalog) {
  const ProductShare* focal = request.sales.find(request.focal_product);
  if (!focal) {
    throw ValidationError(fmt::format("focal product '{}' is not in the sales table",
                                      request.focal_product));
  }
  if (focal->count == 0) {
    throw ValidationError(fmt::format(
        "focal product '{}' has zero market share; the seller needs a product with positive "
        "share",
        request.focal_product));
  }
  const std::string prompt = seller_prompt(request.product_name, request.features,
                                           format_sales_data(request.sales, catalog));
  SellerReply reply = seller.recommend(request, prompt);
  reply.raw["prompt"] = prompt;
  return reply;
}

StubSeller StubSeller::unchanged() {
  StubSeller s("");
  s.echo_title_ = true;
  return s;
}

SellerReply StubSeller::recommend(const SellerRequest& request, const std::string&) const {
  const std::string text =
      echo_title_ ? fmt::format("FINAL_TITLE: {}", request.product_name) : reply_;
  auto title = parse_final_title(text);
  if (!title) throw SellerError("seller reply has no FINAL_TITLE line");
  return SellerReply{*title, {{"agent_kind", "stub"}, {"reply", text}}};
}

LlmSeller::LlmSeller(ProviderConfig config, std::shared_ptr<HttpTransport> transport,
                     std::shared_ptr<RequestBudget> budget, Sleeper sleeper,
                     BackoffPolicy backoff)
    : client_(std::move(config), std::move(transport), std::move(budget)),
      sleeper_(std::move(sleeper)),
      backoff_(backoff) {}

SellerReply LlmSeller::recommend(const SellerRequest& request, const std::string& prompt) const {
  AbstractMessage message;
  message.user = prompt;
  message.attachment = Attachment{AttachKind::Html, request.page.html};
  nlohmann::json attempts = nlohmann::json::array();
  const int max_attempts = client_.config().max_attempts;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    try {
      Exchange ex = client_.send(message);
      attempts.push_back({{"request", ex.request}, {"response", ex.response}});
      if (auto title = parse_final_title(ex.reply.text)) {
        return SellerReply{*title, {{"agent_kind", "llm"}, {"attempts", std::move(attempts)}}};
      }
    } catch (const HttpStatusError& e) {
      attempts.push_back({{"error", e.what()}, {"status", e.status()}});
      if (!e.retryable()) break;
      if (attempt < max_attempts) sleeper_(backoff_.delay(attempt));
    } catch (const TransportError& e) {
      attempts.push_back({{"error", e.what()}});
      if (attempt < max_attempts) sleeper_(backoff_.delay(attempt));
    } catch (const ValidationError& e) {
      attempts.push_back({{"error", e.what()}});
    }
  }
  throw SellerError(fmt::format("seller gave no FINAL_TITLE line after {} attempts: {}",
                                max_attempts, attempts.dump()));
}

}  // namespace agentmart
