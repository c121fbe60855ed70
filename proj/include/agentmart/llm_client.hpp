#pragma once

// Provider-agnostic chat client. Callers build one AbstractMessage; the
// client maps it onto the configured wire format.

#include <atomic>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "agentmart/http_transport.hpp"

namespace agentmart {

enum class ProviderKind { OpenAI, Anthropic };
enum class AttachKind { Png, Html };

struct ProviderConfig {
  ProviderKind provider_kind = ProviderKind::OpenAI;
  std::string model_name;
  std::string endpoint_url;
  std::string api_key_env;  // empty: send no credentials
  int max_attempts = 3;
  AttachKind attach = AttachKind::Html;

  void validate() const;
};

ProviderConfig provider_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const ProviderConfig& config);
ProviderConfig load_provider_config(const std::filesystem::path& path);

struct ToolSchema {
  std::string name;
  std::string description;
  nlohmann::json parameters;  // JSON Schema object
};

// The single tool exposed to buyer agents.
ToolSchema add_to_cart_tool();

struct Attachment {
  AttachKind kind = AttachKind::Html;
  std::string data;  // raw PNG bytes or HTML text
};

struct AbstractMessage {
  std::string system;
  std::string user;
  std::optional<Attachment> attachment;
  std::optional<ToolSchema> tool;
};

nlohmann::json to_openai_body(const AbstractMessage& message,
                              const std::string& model);
nlohmann::json to_anthropic_body(const AbstractMessage& message,
                                 const std::string& model);

struct ToolCall {
  std::string name;
  nlohmann::json arguments;  // object; empty object if unparsable
};

struct ChatReply {
  std::string text;
  std::vector<ToolCall> tool_calls;
};

// Throws ValidationError when the body is not a recognizable reply.
ChatReply parse_openai_reply(const nlohmann::json& body);
ChatReply parse_anthropic_reply(const nlohmann::json& body);

// Caps the number of provider requests of a run. Thread-safe.
class RequestBudget {
 public:
  explicit RequestBudget(std::optional<std::size_t> limit = std::nullopt)
      : limit_(limit) {}
  bool try_acquire() noexcept;
  std::size_t used() const noexcept { return used_.load(); }

 private:
  std::optional<std::size_t> limit_;
  std::atomic<std::size_t> used_{0};
};

class BudgetExhausted : public Error {
 public:
  using Error::Error;
};

struct Exchange {
  nlohmann::json request;   // body as sent, credentials never included
  nlohmann::json response;  // parsed body, or null
  ChatReply reply;
};

class LlmClient {
 public:
  LlmClient(ProviderConfig config, std::shared_ptr<HttpTransport> transport,
            std::shared_ptr<RequestBudget> budget = nullptr);

  const ProviderConfig& config() const noexcept { return config_; }

  // One request, no retries. Throws TransportError (HttpStatusError for a
  // failing status), BudgetExhausted, or EgressDenied.
  Exchange send(const AbstractMessage& message) const;

 private:
  ProviderConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  std::shared_ptr<RequestBudget> budget_;
  std::string api_key_;
};

}  // namespace agentmart
