#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "ksg/error.hpp"

namespace ksg::gateway {

struct CompletionRequest {
  std::string model_id;
  std::string system_prompt;
  std::string user_prompt;
  double temperature = 0.0;
  unsigned max_output_tokens = 1024;
  std::optional<std::string> response_schema_hint;
  std::optional<std::int64_t> seed;

  bool operator==(const CompletionRequest&) const = default;
};

struct TokenUsage {
  std::uint64_t prompt_tokens = 0;
  std::uint64_t completion_tokens = 0;

  bool operator==(const TokenUsage&) const = default;
};

struct CompletionResult {
  std::string raw_text;
  std::string model_id;
  std::int64_t latency_ms = 0;
  unsigned attempt_count = 1;
  std::optional<TokenUsage> usage;

  bool operator==(const CompletionResult&) const = default;
};

struct Failure {
  ErrorCode code = ErrorCode::Transport;
  std::string message;
  int http_status = 0;

  bool operator==(const Failure&) const = default;
};

using Outcome = std::variant<CompletionResult, Failure>;

struct RunRecord {
  std::string fingerprint;
  CompletionRequest request;
  Outcome outcome;
  std::string timestamp;
};

/// Hex SHA-256 over a canonical JSON encoding of model id, prompts,
/// temperature, seed and schema hint.
std::string fingerprint(const CompletionRequest& request);

nlohmann::json to_json(const CompletionRequest& request);
CompletionRequest request_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const RunRecord& record);
RunRecord record_from_json(const nlohmann::json& doc);

/// Transport-level failure from a backend. `retryable` marks connection
/// errors, HTTP 429 and 5xx.
class TransportError : public Error {
public:
  TransportError(ErrorCode code, const std::string& message, bool retryable, int http_status = 0)
      : Error(code, message), retryable_(retryable), http_status_(http_status) {}

  bool retryable() const noexcept { return retryable_; }
  int http_status() const noexcept { return http_status_; }

private:
  bool retryable_;
  int http_status_;
};

/// One attempt against a text-generation service.
class Backend {
public:
  virtual ~Backend() = default;
  virtual std::string_view name() const noexcept = 0;
  /// Returns raw text (and optional usage) or throws ksg::Error.
  virtual CompletionResult send(const CompletionRequest& request) = 0;
};

struct HttpConfig {
  std::string api_base = "https://api.openai.com/v1";
  std::string api_key;
  std::chrono::milliseconds timeout{60000};
};

/// OpenAI-compatible chat-completions client.
class LiveHttpBackend : public Backend {
public:
  explicit LiveHttpBackend(HttpConfig config);
  std::string_view name() const noexcept override { return "live"; }
  CompletionResult send(const CompletionRequest& request) override;

  /// Request body for POST {api_base}/chat/completions.
  static nlohmann::json request_body(const CompletionRequest& request);
  /// Extracts choices[0].message.content and usage from a response body.
  static CompletionResult parse_response(std::string_view body, const std::string& model_id);

private:
  HttpConfig config_;
};

/// Answers from recorded runs by fingerprint; never touches the network.
class ReplayBackend : public Backend {
public:
  ReplayBackend() = default;
  explicit ReplayBackend(std::vector<RunRecord> records);
  std::string_view name() const noexcept override { return "replay"; }
  CompletionResult send(const CompletionRequest& request) override;

  void add(RunRecord record);
  std::size_t size() const noexcept { return records_.size(); }

private:
  std::map<std::string, RunRecord> records_;
};

/// Scripted responses computed from the request alone, so results do not
/// depend on call order or concurrency.
class StubBackend : public Backend {
public:
  using Script = std::function<Outcome(const CompletionRequest&)>;

  explicit StubBackend(Script script);
  std::string_view name() const noexcept override { return "stub"; }
  CompletionResult send(const CompletionRequest& request) override;

  /// Always answers `text`.
  static std::shared_ptr<StubBackend> echo(std::string text);

  /// Rule file: {"rules":[{"model"?, "contains"?:[...], "response"? | "error"?:
  /// {"kind":"transport"|"timeout", "status"?}}], "default"?}. The first rule
  /// whose model matches and whose substrings all occur in the user prompt
  /// wins. No match and no default is a NotFound failure.
  static std::shared_ptr<StubBackend> from_script(const nlohmann::json& script);

private:
  Script script_;
};

struct GatewayOptions {
  unsigned max_attempts = 3;
  std::chrono::milliseconds backoff_base{1000};
  double backoff_factor = 2.0;
  double requests_per_second = 0.0;  // 0 disables rate limiting
};

/// Serializes request start times to at most `rate` per second.
class RateLimiter {
public:
  explicit RateLimiter(double requests_per_second);
  void acquire();

private:
  std::mutex mutex_;
  std::chrono::steady_clock::duration interval_{};
  std::chrono::steady_clock::time_point next_{};
};

/// Shared front door to a backend: retries, rate limiting and recording.
/// Safe to call from several threads.
class ModelGateway {
public:
  using Recorder = std::function<void(const RunRecord&)>;

  explicit ModelGateway(std::shared_ptr<Backend> backend, GatewayOptions options = {});

  /// Retries retryable transport failures with exponential backoff up to
  /// max_attempts. Every final outcome is passed to the recorder before the
  /// result is returned or the error rethrown.
  CompletionResult complete(const CompletionRequest& request);

  /// Results aligned with `requests`; at most `parallelism` in flight; one
  /// failure never aborts the batch.
  std::vector<Outcome> complete_many(const std::vector<CompletionRequest>& requests,
                                     std::size_t parallelism);

  void set_recorder(Recorder recorder);
  const Backend& backend() const noexcept { return *backend_; }
  const GatewayOptions& options() const noexcept { return options_; }

private:
  std::shared_ptr<Backend> backend_;
  GatewayOptions options_;
  RateLimiter limiter_;
  std::mutex recorder_mutex_;
  Recorder recorder_;
};

/// Runs fn(i) for i in [0, n) on up to `parallelism` threads. Exceptions
/// escaping fn are rethrown after all workers finish (first one wins).
void parallel_for(std::size_t n, std::size_t parallelism, const std::function<void(std::size_t)>& fn);

std::string utc_timestamp();

}  // namespace ksg::gateway
