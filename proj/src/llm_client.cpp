#include "agentmart/llm_client.hpp"

#include <cstdlib>
#include <fstream>

#include <fmt/format.h>

namespace agentmart {

namespace {

ProviderKind provider_kind_from_string(const std::string& s) {
  if (s == "openai") return ProviderKind::OpenAI;
  if (s == "anthropic") return ProviderKind::Anthropic;
  throw ValidationError(fmt::format(
      "provider_kind '{}' is not supported (expected openai or anthropic)", s));
}

std::string_view to_string(ProviderKind k) {
  return k == ProviderKind::OpenAI ? "openai" : "anthropic";
}

AttachKind attach_from_string(const std::string& s) {
  if (s == "png") return AttachKind::Png;
  if (s == "html") return AttachKind::Html;
  throw ValidationError(fmt::format("attach '{}' must be png or html", s));
}

std::string attachment_preamble() {
  return "The search results page is attached below as HTML source.";
}

}  // namespace

void ProviderConfig::validate() const {
  if (model_name.empty()) throw ValidationError("provider config: model_name is empty");
  if (endpoint_url.rfind("http://", 0) != 0 && endpoint_url.rfind("https://", 0) != 0) {
    throw ValidationError(fmt::format(
        "provider config: endpoint_url '{}' must start with http:// or https://",
        endpoint_url));
  }
  if (max_attempts < 1) throw ValidationError("provider config: max_attempts must be >= 1");
}

ProviderConfig provider_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("provider config must be a JSON object");
  ProviderConfig c;
  try {
    c.provider_kind = provider_kind_from_string(j.at("provider_kind").get<std::string>());
    c.model_name = j.at("model_name").get<std::string>();
    c.endpoint_url = j.at("endpoint_url").get<std::string>();
    c.api_key_env = j.value("api_key_env", std::string{});
    c.max_attempts = j.value("max_attempts", 3);
    c.attach = attach_from_string(j.value("attach", std::string{"html"}));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("provider config: {}", e.what()));
  }
  c.validate();
  return c;
}

nlohmann::ordered_json to_json(const ProviderConfig& c) {
  nlohmann::ordered_json j;
  j["provider_kind"] = to_string(c.provider_kind);
  j["model_name"] = c.model_name;
  j["endpoint_url"] = c.endpoint_url;
  j["api_key_env"] = c.api_key_env;
  j["max_attempts"] = c.max_attempts;
  j["attach"] = c.attach == AttachKind::Png ? "png" : "html";
  return j;
}

ProviderConfig load_provider_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open provider config {}", path.string()));
  try {
    return provider_config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

ToolSchema add_to_cart_tool() {
  return ToolSchema{
      "add_to_cart",
      "Add the chosen product to the cart. Call exactly once with the product "
      "ID shown on the listing.",
      {{"type", "object"},
       {"properties",
        {{"product_id",
          {{"type", "string"}, {"description", "ID of the product to buy"}}}}},
       {"required", {"product_id"}}}};
}

nlohmann::json to_openai_body(const AbstractMessage& m, const std::string& model) {
  nlohmann::json user_content = nlohmann::json::array();
  user_content.push_back({{"type", "text"}, {"text", m.user}});
  if (m.attachment) {
    if (m.attachment->kind == AttachKind::Png) {
      user_content.push_back(
          {{"type", "image_url"},
           {"image_url",
            {{"url", "data:image/png;base64," +
                         base64_encode(m.attachment->data)}}}});
    } else {
      user_content.push_back(
          {{"type", "text"}, {"text", attachment_preamble() + "\n" + m.attachment->data}});
    }
  }
  nlohmann::json body;
  body["model"] = model;
  body["messages"] = nlohmann::json::array();
  if (!m.system.empty()) {
    body["messages"].push_back({{"role", "system"}, {"content", m.system}});
  }
  body["messages"].push_back({{"role", "user"}, {"content", user_content}});
  if (m.tool) {
    body["tools"] = {{{"type", "function"},
                      {"function",
                       {{"name", m.tool->name},
                        {"description", m.tool->description},
                        {"parameters", m.tool->parameters}}}}};
    body["tool_choice"] = "auto";
  }
  return body;
}

nlohmann::json to_anthropic_body(const AbstractMessage& m, const std::string& model) {
  nlohmann::json user_content = nlohmann::json::array();
  user_content.push_back({{"type", "text"}, {"text", m.user}});
  if (m.attachment) {
    if (m.attachment->kind == AttachKind::Png) {
      user_content.push_back(
          {{"type", "image"},
           {"source",
            {{"type", "base64"},
             {"media_type", "image/png"},
             {"data", base64_encode(m.attachment->data)}}}});
    } else {
      user_content.push_back(
          {{"type", "text"}, {"text", attachment_preamble() + "\n" + m.attachment->data}});
    }
  }
  nlohmann::json body;
  body["model"] = model;
  body["max_tokens"] = 4096;
  if (!m.system.empty()) body["system"] = m.system;
  body["messages"] = {{{"role", "user"}, {"content", user_content}}};
  if (m.tool) {
    body["tools"] = {{{"name", m.tool->name},
                      {"description", m.tool->description},
                      {"input_schema", m.tool->parameters}}};
  }
  return body;
}

ChatReply parse_openai_reply(const nlohmann::json& body) {
  if (!body.is_object() || !body.contains("choices") || !body["choices"].is_array() ||
      body["choices"].empty()) {
    throw ValidationError("reply has no choices");
  }
  const auto& message = body["choices"][0].value("message", nlohmann::json::object());
  ChatReply reply;
  if (message.contains("content") && message["content"].is_string()) {
    reply.text = message["content"].get<std::string>();
  }
  if (message.contains("tool_calls") && message["tool_calls"].is_array()) {
    for (const auto& call : message["tool_calls"]) {
      const auto fn = call.value("function", nlohmann::json::object());
      ToolCall tc;
      tc.name = fn.value("name", std::string{});
      tc.arguments = nlohmann::json::object();
      if (fn.contains("arguments")) {
        const auto& args = fn["arguments"];
        if (args.is_string()) {
          tc.arguments = nlohmann::json::parse(args.get<std::string>(), nullptr, false);
          if (tc.arguments.is_discarded() || !tc.arguments.is_object()) {
            tc.arguments = nlohmann::json::object();
          }
        } else if (args.is_object()) {
          tc.arguments = args;
        }
      }
      reply.tool_calls.push_back(std::move(tc));
    }
  }
  return reply;
}

ChatReply parse_anthropic_reply(const nlohmann::json& body) {
  if (!body.is_object() || !body.contains("content") || !body["content"].is_array()) {
    throw ValidationError("reply has no content array");
  }
  ChatReply reply;
  for (const auto& block : body["content"]) {
    const auto type = block.value("type", std::string{});
    if (type == "text") {
      if (!reply.text.empty()) reply.text += "\n";
      reply.text += block.value("text", std::string{});
    } else if (type == "tool_use") {
      ToolCall tc;
      tc.name = block.value("name", std::string{});
      tc.arguments = block.value("input", nlohmann::json::object());
      if (!tc.arguments.is_object()) tc.arguments = nlohmann::json::object();
      reply.tool_calls.push_back(std::move(tc));
    }
  }
  return reply;
}

bool RequestBudget::try_acquire() noexcept {
  const std::size_t n = used_.fetch_add(1) + 1;
  if (limit_ && n > *limit_) {
    used_.fetch_sub(1);
    return false;
  }
  return true;
}

LlmClient::LlmClient(ProviderConfig config, std::shared_ptr<HttpTransport> transport,
                     std::shared_ptr<RequestBudget> budget)
    : config_(std::move(config)), transport_(std::move(transport)), budget_(std::move(budget)) {
  config_.validate();
  if (!transport_) throw ValidationError("LlmClient needs a transport");
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw ValidationError(fmt::format("environment variable {} (api_key_env) is not set",
                                        config_.api_key_env));
    }
    api_key_ = key;
  }
}

Exchange LlmClient::send(const AbstractMessage& message) const {
  Exchange ex;
  HttpRequest request;
  request.url = config_.endpoint_url;
  request.headers.emplace_back("Content-Type", "application/json");
  if (config_.provider_kind == ProviderKind::OpenAI) {
    ex.request = to_openai_body(message, config_.model_name);
    if (!api_key_.empty()) request.headers.emplace_back("Authorization", "Bearer " + api_key_);
  } else {
    ex.request = to_anthropic_body(message, config_.model_name);
    request.headers.emplace_back("anthropic-version", "2023-06-01");
    if (!api_key_.empty()) request.headers.emplace_back("x-api-key", api_key_);
  }
  request.body = ex.request.dump();

  if (budget_ && !budget_->try_acquire()) {
    throw BudgetExhausted("request budget exhausted");
  }
  const HttpResponse response = transport_->post(request);
  ex.response = nlohmann::json::parse(response.body, nullptr, false);
  if (ex.response.is_discarded()) ex.response = nullptr;
  if (response.status < 200 || response.status >= 300) {
    throw HttpStatusError(fmt::format("{} returned HTTP {}", config_.endpoint_url,
                                      response.status),
                          response.status);
  }
  if (ex.response.is_null()) {
    throw TransportError(fmt::format("{} returned a non-JSON body", config_.endpoint_url));
  }
  ex.reply = config_.provider_kind == ProviderKind::OpenAI
                 ? parse_openai_reply(ex.response)
                 : parse_anthropic_reply(ex.response);
  return ex;
}

}  // namespace agentmart
