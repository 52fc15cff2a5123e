#include "ksg/gateway.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ctime>
#include <exception>
#include <thread>

#include "ksg/hash.hpp"

namespace ksg::gateway {
namespace {

using nlohmann::json;

bool retryable(const Failure& f)
{
  if (f.code == ErrorCode::Timeout) return true;
  if (f.code != ErrorCode::Transport) return false;
  return f.http_status == 0 || f.http_status == 429 || f.http_status >= 500;
}

json outcome_to_json(const Outcome& outcome)
{
  if (const auto* r = std::get_if<CompletionResult>(&outcome)) {
    json result{{"raw_text", r->raw_text},
                {"model_id", r->model_id},
                {"latency_ms", r->latency_ms},
                {"attempt_count", r->attempt_count}};
    result["usage"] = r->usage ? json{{"prompt_tokens", r->usage->prompt_tokens},
                                      {"completion_tokens", r->usage->completion_tokens}}
                               : json(nullptr);
    return {{"status", "ok"}, {"result", result}};
  }
  const auto& f = std::get<Failure>(outcome);
  return {{"status", "failure"},
          {"code", std::string(to_string(f.code))},
          {"message", f.message},
          {"http_status", f.http_status}};
}

ErrorCode code_from_name(const std::string& name)
{
  for (int c = static_cast<int>(ErrorCode::InvalidArgument); c <= static_cast<int>(ErrorCode::Internal); ++c) {
    if (to_string(static_cast<ErrorCode>(c)) == name) return static_cast<ErrorCode>(c);
  }
  return ErrorCode::Internal;
}

}  // namespace

std::string utc_timestamp()
{
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json to_json(const CompletionRequest& r)
{
  return {{"model_id", r.model_id},
          {"system_prompt", r.system_prompt},
          {"user_prompt", r.user_prompt},
          {"temperature", r.temperature},
          {"max_output_tokens", r.max_output_tokens},
          {"response_schema_hint", r.response_schema_hint ? json(*r.response_schema_hint) : json(nullptr)},
          {"seed", r.seed ? json(*r.seed) : json(nullptr)}};
}

CompletionRequest request_from_json(const json& doc)
{
  CompletionRequest r;
  r.model_id = doc.at("model_id").get<std::string>();
  r.system_prompt = doc.at("system_prompt").get<std::string>();
  r.user_prompt = doc.at("user_prompt").get<std::string>();
  r.temperature = doc.at("temperature").get<double>();
  r.max_output_tokens = doc.value("max_output_tokens", 1024u);
  if (doc.contains("response_schema_hint") && !doc["response_schema_hint"].is_null()) {
    r.response_schema_hint = doc["response_schema_hint"].get<std::string>();
  }
  if (doc.contains("seed") && !doc["seed"].is_null()) r.seed = doc["seed"].get<std::int64_t>();
  return r;
}

std::string fingerprint(const CompletionRequest& r)
{
  const json key{{"model_id", r.model_id},
                 {"system_prompt", r.system_prompt},
                 {"user_prompt", r.user_prompt},
                 {"temperature", r.temperature},
                 {"seed", r.seed ? json(*r.seed) : json(nullptr)},
                 {"response_schema_hint", r.response_schema_hint ? json(*r.response_schema_hint) : json(nullptr)}};
  return sha256_hex(key.dump());
}

json to_json(const RunRecord& record)
{
  return {{"fingerprint", record.fingerprint},
          {"request", to_json(record.request)},
          {"outcome", outcome_to_json(record.outcome)},
          {"timestamp", record.timestamp}};
}

RunRecord record_from_json(const json& doc)
{
  try {
    RunRecord record;
    record.fingerprint = doc.at("fingerprint").get<std::string>();
    record.request = request_from_json(doc.at("request"));
    record.timestamp = doc.value("timestamp", std::string{});
    const auto& outcome = doc.at("outcome");
    if (outcome.at("status") == "ok") {
      const auto& r = outcome.at("result");
      CompletionResult result;
      result.raw_text = r.at("raw_text").get<std::string>();
      result.model_id = r.value("model_id", record.request.model_id);
      result.latency_ms = r.value("latency_ms", std::int64_t{0});
      result.attempt_count = r.value("attempt_count", 1u);
      if (r.contains("usage") && !r["usage"].is_null()) {
        result.usage = TokenUsage{r["usage"].value("prompt_tokens", std::uint64_t{0}),
                                  r["usage"].value("completion_tokens", std::uint64_t{0})};
      }
      record.outcome = result;
    } else {
      record.outcome = Failure{code_from_name(outcome.at("code").get<std::string>()),
                               outcome.value("message", std::string{}), outcome.value("http_status", 0)};
    }
    return record;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("run record: ") + e.what());
  }
}

ReplayBackend::ReplayBackend(std::vector<RunRecord> records)
{
  for (auto& r : records) add(std::move(r));
}

void ReplayBackend::add(RunRecord record)
{
  auto key = record.fingerprint;
  records_.insert_or_assign(std::move(key), std::move(record));
}

CompletionResult ReplayBackend::send(const CompletionRequest& request)
{
  const auto fp = fingerprint(request);
  auto it = records_.find(fp);
  if (it == records_.end()) throw Error(ErrorCode::ReplayMiss, "replay miss: no recorded response for fingerprint " + fp);
  if (const auto* f = std::get_if<Failure>(&it->second.outcome)) {
    // Recorded failures replay as final, non-retryable failures.
    throw TransportError(f->code, f->message, false, f->http_status);
  }
  return std::get<CompletionResult>(it->second.outcome);
}

StubBackend::StubBackend(Script script) : script_(std::move(script)) {}

CompletionResult StubBackend::send(const CompletionRequest& request)
{
  auto outcome = script_(request);
  if (auto* result = std::get_if<CompletionResult>(&outcome)) {
    if (result->model_id.empty()) result->model_id = request.model_id;
    return *result;
  }
  const auto& f = std::get<Failure>(outcome);
  if (f.code == ErrorCode::Transport || f.code == ErrorCode::Timeout) {
    throw TransportError(f.code, f.message, retryable(f), f.http_status);
  }
  throw Error(f.code, f.message);
}

std::shared_ptr<StubBackend> StubBackend::echo(std::string text)
{
  return std::make_shared<StubBackend>([text = std::move(text)](const CompletionRequest&) -> Outcome {
    return CompletionResult{text, {}, 0, 1, std::nullopt};
  });
}

std::shared_ptr<StubBackend> StubBackend::from_script(const json& script)
{
  struct Rule {
    std::optional<std::string> model;
    std::vector<std::string> contains;
    Outcome outcome;
  };
  auto bad = [](const std::string& what) { return Error(ErrorCode::Config, "stub script: " + what); };
  if (!script.is_object()) throw bad("expected an object");

  auto parse_outcome = [&](const json& rule, const std::string& where) -> Outcome {
    if (rule.contains("response")) {
      if (!rule["response"].is_string()) throw bad(where + ".response must be a string");
      return CompletionResult{rule["response"].get<std::string>(), {}, 0, 1, std::nullopt};
    }
    if (rule.contains("error")) {
      const auto& e = rule["error"];
      const auto kind = e.value("kind", std::string("transport"));
      if (kind != "transport" && kind != "timeout") throw bad(where + ".error.kind must be transport or timeout");
      const int status = e.value("status", 0);
      return Failure{kind == "timeout" ? ErrorCode::Timeout : ErrorCode::Transport,
                     "scripted " + kind + " failure" + (status ? " (HTTP " + std::to_string(status) + ")" : ""),
                     status};
    }
    throw bad(where + " needs \"response\" or \"error\"");
  };

  std::vector<Rule> rules;
  if (script.contains("rules")) {
    if (!script["rules"].is_array()) throw bad("\"rules\" must be an array");
    for (std::size_t i = 0; i < script["rules"].size(); ++i) {
      const auto& r = script["rules"][i];
      const auto where = "rules[" + std::to_string(i) + "]";
      if (!r.is_object()) throw bad(where + " must be an object");
      Rule rule{std::nullopt, {}, parse_outcome(r, where)};
      if (r.contains("model")) rule.model = r["model"].get<std::string>();
      if (r.contains("contains")) {
        if (r["contains"].is_string()) rule.contains.push_back(r["contains"].get<std::string>());
        else rule.contains = r["contains"].get<std::vector<std::string>>();
      }
      rules.push_back(std::move(rule));
    }
  }
  std::optional<Outcome> fallback;
  if (script.contains("default")) {
    if (script["default"].is_string()) {
      fallback = CompletionResult{script["default"].get<std::string>(), {}, 0, 1, std::nullopt};
    } else {
      fallback = parse_outcome(script["default"], "default");
    }
  }

  return std::make_shared<StubBackend>([rules = std::move(rules), fallback](const CompletionRequest& request) -> Outcome {
    for (const auto& rule : rules) {
      if (rule.model && *rule.model != request.model_id) continue;
      const bool all = std::all_of(rule.contains.begin(), rule.contains.end(), [&](const std::string& needle) {
        return request.user_prompt.find(needle) != std::string::npos;
      });
      if (all) return rule.outcome;
    }
    if (fallback) return *fallback;
    return Failure{ErrorCode::NotFound, "stub script has no rule for request " + fingerprint(request), 0};
  });
}

RateLimiter::RateLimiter(double requests_per_second)
{
  if (requests_per_second > 0) {
    interval_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / requests_per_second));
  }
}

void RateLimiter::acquire()
{
  if (interval_ == std::chrono::steady_clock::duration::zero()) return;
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_);
    next_ = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

ModelGateway::ModelGateway(std::shared_ptr<Backend> backend, GatewayOptions options)
    : backend_(std::move(backend)), options_(options), limiter_(options.requests_per_second)
{
  if (!backend_) throw Error(ErrorCode::Config, "model gateway needs a backend");
  if (options_.max_attempts == 0) throw Error(ErrorCode::Config, "max_attempts must be at least 1");
}

void ModelGateway::set_recorder(Recorder recorder)
{
  std::lock_guard lock(recorder_mutex_);
  recorder_ = std::move(recorder);
}

CompletionResult ModelGateway::complete(const CompletionRequest& request)
{
  if (request.system_prompt.empty() || request.user_prompt.empty()) {
    throw Error(ErrorCode::InvalidArgument, "completion request needs non-empty prompts");
  }
  if (request.max_output_tokens == 0) throw Error(ErrorCode::InvalidArgument, "max_output_tokens must be positive");

  auto record = [&](Outcome outcome) {
    std::lock_guard lock(recorder_mutex_);
    if (recorder_) recorder_(RunRecord{fingerprint(request), request, std::move(outcome), utc_timestamp()});
  };

  for (unsigned attempt = 1;; ++attempt) {
    limiter_.acquire();
    const auto start = std::chrono::steady_clock::now();
    try {
      auto result = backend_->send(request);
      result.attempt_count = attempt;
      result.latency_ms =
          std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
      if (result.model_id.empty()) result.model_id = request.model_id;
      record(result);
      return result;
    } catch (const TransportError& e) {
      if (!e.retryable() || attempt >= options_.max_attempts) {
        record(Failure{e.code(), e.what(), e.http_status()});
        throw;
      }
      const auto delay = std::chrono::duration<double, std::milli>(
          static_cast<double>(options_.backoff_base.count()) * std::pow(options_.backoff_factor, attempt - 1));
      std::this_thread::sleep_for(delay);
    }
  }
}

std::vector<Outcome> ModelGateway::complete_many(const std::vector<CompletionRequest>& requests,
                                                 std::size_t parallelism)
{
  if (parallelism == 0) throw Error(ErrorCode::InvalidArgument, "parallelism must be at least 1");
  std::vector<Outcome> out(requests.size(), Failure{ErrorCode::Internal, "not run", 0});
  parallel_for(requests.size(), parallelism, [&](std::size_t i) {
    try {
      out[i] = complete(requests[i]);
    } catch (const TransportError& e) {
      out[i] = Failure{e.code(), e.what(), e.http_status()};
    } catch (const Error& e) {
      out[i] = Failure{e.code(), e.what(), 0};
    } catch (const std::exception& e) {
      out[i] = Failure{ErrorCode::Internal, e.what(), 0};
    }
  });
  return out;
}

void parallel_for(std::size_t n, std::size_t parallelism, const std::function<void(std::size_t)>& fn)
{
  if (n == 0) return;
  const auto workers = std::max<std::size_t>(1, std::min(parallelism, n));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (auto i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) threads.emplace_back(work);
  }
  // Lowest index wins so the reported error does not depend on scheduling.
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace ksg::gateway
