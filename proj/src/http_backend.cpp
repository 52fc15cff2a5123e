#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "ksg/gateway.hpp"

namespace ksg::gateway {
namespace {

using nlohmann::json;

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // path prefix without trailing '/'
};

Endpoint split_base(const std::string& base)
{
  const auto scheme_end = base.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::Config, "API base '" + base + "' lacks a scheme");
  const auto path_start = base.find('/', scheme_end + 3);
  Endpoint e;
  e.origin = base.substr(0, path_start);
  e.path = path_start == std::string::npos ? "" : base.substr(path_start);
  while (!e.path.empty() && e.path.back() == '/') e.path.pop_back();
  return e;
}

}  // namespace

LiveHttpBackend::LiveHttpBackend(HttpConfig config) : config_(std::move(config))
{
  split_base(config_.api_base);
}

json LiveHttpBackend::request_body(const CompletionRequest& request)
{
  json body{{"model", request.model_id},
            {"messages",
             json::array({{{"role", "system"}, {"content", request.system_prompt}},
                          {{"role", "user"}, {"content", request.user_prompt}}})},
            {"temperature", request.temperature},
            {"max_tokens", request.max_output_tokens}};
  if (request.seed) body["seed"] = *request.seed;
  if (request.response_schema_hint) body["response_format"] = {{"type", "json_object"}};
  return body;
}

CompletionResult LiveHttpBackend::parse_response(std::string_view body, const std::string& model_id)
{
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    throw TransportError(ErrorCode::Transport, std::string("malformed chat-completions response: ") + e.what(), false);
  }
  const auto choices = doc.find("choices");
  if (choices == doc.end() || !choices->is_array() || choices->empty()) {
    throw TransportError(ErrorCode::Transport, "chat-completions response has no choices", false);
  }
  const auto& message = (*choices)[0].value("message", json::object());
  CompletionResult result;
  result.model_id = doc.value("model", model_id);
  if (message.contains("content") && message["content"].is_string()) {
    result.raw_text = message["content"].get<std::string>();
  }
  if (doc.contains("usage") && doc["usage"].is_object()) {
    result.usage = TokenUsage{doc["usage"].value("prompt_tokens", std::uint64_t{0}),
                              doc["usage"].value("completion_tokens", std::uint64_t{0})};
  }
  return result;
}

CompletionResult LiveHttpBackend::send(const CompletionRequest& request)
{
  const auto endpoint = split_base(config_.api_base);
  httplib::Client client(endpoint.origin);
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - seconds);
  client.set_connection_timeout(seconds.count(), micros.count());
  client.set_read_timeout(seconds.count(), micros.count());
  client.set_write_timeout(seconds.count(), micros.count());

  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  auto response = client.Post(endpoint.path + "/chat/completions", headers, request_body(request).dump(),
                              "application/json");
  if (!response) {
    const auto err = response.error();
    const bool timeout = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
    throw TransportError(timeout ? ErrorCode::Timeout : ErrorCode::Transport,
                         "HTTP request failed: " + httplib::to_string(err), true);
  }
  const int status = response->status;
  if (status == 429 || status >= 500) {
    throw TransportError(ErrorCode::Transport, "HTTP " + std::to_string(status), true, status);
  }
  if (status < 200 || status >= 300) {
    throw TransportError(ErrorCode::Transport, "HTTP " + std::to_string(status) + ": " + response->body, false, status);
  }
  return parse_response(response->body, request.model_id);
}

}  // namespace ksg::gateway
