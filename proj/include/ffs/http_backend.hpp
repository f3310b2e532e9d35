#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "ffs/backend.hpp"
#include "ffs/errors.hpp"
#include "ffs/types.hpp"

namespace firstfinish {

struct ApiConfig {
  std::string base_url;  // absolute, e.g. "https://api.deepinfra.com" or "http://127.0.0.1:8089"
  std::string api_key;   // from FFS_API_KEY; never logged
  std::string model_name;
  std::string path = "/v1/chat/completions";
  double request_timeout_s = 300.0;
  int max_retries = 2;
  double retry_base_delay_s = 0.25;
  bool enable_continuation = false;  // BF over HTTP, guarded by bf_call_limit
  int bf_call_limit = 16;

  static ApiConfig from_env(const std::string& model) {
    ApiConfig c;
    const char* url = std::getenv("FFS_BASE_URL");
    const char* key = std::getenv("FFS_API_KEY");
    if (!key) throw std::runtime_error("FFS_API_KEY is not set");
    c.api_key = key;
    c.base_url = url ? url : "https://api.deepinfra.com";
    c.model_name = model;
    return c;
  }
};

/// Request body for a streaming chat completion; field order is normalized
/// (lexicographic) so serialization is golden-file comparable.
inline nlohmann::json build_request_body(const ApiConfig& config, const std::string& prompt,
                                         const DecodeParams& params) {
  return nlohmann::json{
      {"model", config.model_name},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
      {"temperature", params.temperature},
      {"top_p", params.top_p},
      {"max_tokens", params.max_tokens},
      {"stream", true},
  };
}

/// Provider-reported completion tokens when available, else the received
/// delta count flagged as approximate.
struct TokenCount {
  long value = 0;
  bool approximate = false;
};

inline TokenCount count_tokens(long deltas_received, std::optional<long> usage_completion_tokens) {
  if (usage_completion_tokens) return {*usage_completion_tokens, false};
  return {deltas_received, true};
}

/// Incremental server-sent-events splitter: feed raw chunks, get back the
/// "data:" payloads of every complete event.
class SseParser {
 public:
  std::vector<std::string> feed(const char* data, std::size_t len) {
    buffer_.append(data, len);
    std::vector<std::string> payloads;
    std::size_t event_end;
    while ((event_end = buffer_.find("\n\n")) != std::string::npos) {
      std::string event = buffer_.substr(0, event_end);
      buffer_.erase(0, event_end + 2);
      std::size_t line_start = 0;
      while (line_start <= event.size()) {
        std::size_t line_end = event.find('\n', line_start);
        if (line_end == std::string::npos) line_end = event.size();
        std::string line = event.substr(line_start, line_end - line_start);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.rfind("data:", 0) == 0) {
          std::string payload = line.substr(5);
          if (!payload.empty() && payload.front() == ' ') payload.erase(0, 1);
          payloads.push_back(std::move(payload));
        }
        line_start = line_end + 1;
      }
    }
    return payloads;
  }

 private:
  std::string buffer_;
};

/// Result of consuming one stream to its end (or to cancellation/failure).
struct StreamOutcome {
  long deltas = 0;
  std::string text;
  std::string finish_reason;  // "stop" | "length" | "" when cancelled/failed
  std::optional<long> usage_completion_tokens;
  bool done = false;       // saw the terminal [DONE] frame
  bool cancelled = false;
  bool failed = false;
  std::string error;
};

namespace detail {

inline bool is_transport_or_5xx(const httplib::Result& res) {
  if (!res) return true;
  return res->status >= 500;
}

}  // namespace detail

/// One streaming chat-completion request, run to completion unless the shared
/// cancel flag is raised. Retries (with exponential backoff) happen only
/// before the first delta arrives; there is no mid-stream resume.
inline StreamOutcome run_stream_once(const ApiConfig& config, const std::string& body,
                                     const std::atomic<bool>& cancel_flag) {
  StreamOutcome out;
  int attempt = 0;
  while (true) {
    out = StreamOutcome{};
    SseParser parser;
    httplib::Client cli(config.base_url);
    cli.set_connection_timeout(std::chrono::milliseconds(
        static_cast<long>(config.request_timeout_s * 1000)));
    cli.set_read_timeout(std::chrono::milliseconds(
        static_cast<long>(config.request_timeout_s * 1000)));

    httplib::Request req;
    req.method = "POST";
    req.path = config.path;
    req.body = body;
    req.set_header("Content-Type", "application/json");
    if (!config.api_key.empty()) req.set_header("Authorization", "Bearer " + config.api_key);
    req.content_receiver = [&](const char* data, std::size_t len, std::uint64_t,
                               std::uint64_t) -> bool {
      if (cancel_flag.load(std::memory_order_acquire)) {
        out.cancelled = true;
        return false;  // aborts the connection
      }
      for (std::string& payload : parser.feed(data, len)) {
        if (payload == "[DONE]") {
          out.done = true;
          continue;
        }
        nlohmann::json frame = nlohmann::json::parse(payload, nullptr, false);
        if (frame.is_discarded()) {
          out.failed = true;
          out.error = "malformed stream frame: " + payload.substr(0, 120);
          return false;
        }
        if (frame.contains("choices") && !frame["choices"].empty()) {
          const auto& choice = frame["choices"][0];
          if (choice.contains("delta") && choice["delta"].contains("content") &&
              choice["delta"]["content"].is_string()) {
            out.text += choice["delta"]["content"].get<std::string>();
            ++out.deltas;
          }
          if (choice.contains("finish_reason") && choice["finish_reason"].is_string()) {
            out.finish_reason = choice["finish_reason"].get<std::string>();
          }
        }
        if (frame.contains("usage") && frame["usage"].contains("completion_tokens")) {
          out.usage_completion_tokens = frame["usage"]["completion_tokens"].get<long>();
        }
      }
      return true;
    };

    httplib::Response res;
    httplib::Error err = httplib::Error::Success;
    const bool ok = cli.send(req, res, err);

    if (out.cancelled) return out;
    if (out.failed) return out;
    if (ok && res.status >= 200 && res.status < 300) {
      if (!out.done && out.finish_reason.empty()) {
        out.failed = true;
        out.error = "stream ended without a terminal frame";
      }
      return out;
    }
    const bool retryable = !ok || res.status >= 500;
    if (ok && res.status >= 400 && res.status < 500) {
      out.failed = true;
      out.error = "JOB_FAILED: HTTP " + std::to_string(res.status);
      return out;
    }
    if (retryable && out.deltas == 0 && attempt < config.max_retries) {
      std::this_thread::sleep_for(std::chrono::duration<double>(
          config.retry_base_delay_s * static_cast<double>(1L << attempt)));
      ++attempt;
      continue;
    }
    out.failed = true;
    out.error = ok ? "JOB_FAILED: HTTP " + std::to_string(res.status)
                   : "JOB_FAILED: transport error " + std::to_string(static_cast<int>(err));
    return out;
  }
}

/// n concurrent streaming jobs with cooperative cancellation; completions are
/// consumed in arrival order.
class HttpJobGroup : public JobGroup {
 public:
  HttpJobGroup(const ApiConfig& config, const PromptSpec& prompt, const DecodeParams& params,
               int n_jobs)
      : config_(config), prompt_(prompt), n_jobs_(n_jobs) {
    const std::string body = build_request_body(config, prompt.text, params).dump();
    cancel_flags_.reserve(n_jobs);
    for (int j = 0; j < n_jobs; ++j) cancel_flags_.push_back(std::make_unique<std::atomic<bool>>(false));
    for (int j = 0; j < n_jobs; ++j) {
      threads_.emplace_back([this, j, body] {
        StreamOutcome s = run_stream_once(config_, body, *cancel_flags_[j]);
        push_completion(j, std::move(s));
      });
    }
  }

  ~HttpJobGroup() override {
    cancel_all();
    for (auto& t : threads_) {
      if (t.joinable()) t.join();
    }
  }

  Completion next() override {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [&] { return !queue_.empty(); });
    Completion c = std::move(queue_.front());
    queue_.pop_front();
    ++consumed_;
    return c;
  }

  void cancel_all() override {
    for (auto& flag : cancel_flags_) flag->store(true, std::memory_order_release);
  }

  int remaining() const override {
    std::lock_guard<std::mutex> lock(mu_);
    return n_jobs_ - consumed_;
  }

 private:
  void push_completion(int job_index, StreamOutcome s) {
    Completion c;
    c.job_index = job_index;
    c.trace.trace_id = job_index + 1;
    c.trace.prompt_id = prompt_.id;
    c.trace.text = std::move(s.text);
    const TokenCount tokens = count_tokens(s.deltas, s.usage_completion_tokens);
    c.trace.token_count = tokens.value;
    if (s.cancelled) {
      c.trace.finish_reason = FinishReason::Cancelled;
      c.trace.token_count = count_tokens(s.deltas, std::nullopt).value;  // partials are approximate
    } else if (s.failed) {
      c.failed = true;
      c.error = s.error;
      c.trace.finish_reason = FinishReason::Cancelled;
    } else {
      c.trace.finish_reason =
          s.finish_reason == "length" ? FinishReason::LengthCap : FinishReason::Eos;
    }
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (c.trace.finish_reason != FinishReason::Cancelled) {
        c.trace.completion_order = ++order_counter_;
      }
      queue_.push_back(std::move(c));
    }
    cv_.notify_all();
  }

  ApiConfig config_;
  PromptSpec prompt_;
  int n_jobs_;
  std::vector<std::unique_ptr<std::atomic<bool>>> cancel_flags_;
  std::vector<std::thread> threads_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Completion> queue_;
  int consumed_ = 0;
  int order_counter_ = 0;
};

/// OpenAI-compatible streaming chat-completions client. Lock-step decoding is
/// not available over the wire; FFS over HTTP is the async variant.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(ApiConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) throw std::invalid_argument("http backend: base_url is empty");
  }

  std::string name() const override { return "http"; }
  bool supports_lockstep() const override { return false; }
  bool supports_continuation() const override { return config_.enable_continuation; }

  std::unique_ptr<JobGroup> launch(const PromptSpec& prompt, const DecodeParams& params,
                                   int n_jobs) override {
    return std::make_unique<HttpJobGroup>(config_, prompt, params, n_jobs);
  }

  Segment decode_segment(const PromptSpec& prompt, const std::string& prefix,
                         const DecodeParams& params, long max_new_tokens,
                         int /*segment_index*/) override {
    if (!config_.enable_continuation) {
      throw UnsupportedBackend(
          "UNSUPPORTED_BACKEND: continuation over HTTP is disabled (enable_continuation)");
    }
    if (++continuation_calls_ > config_.bf_call_limit) {
      throw JobFailed("JOB_FAILED: budget-forcing call limit exceeded");
    }
    DecodeParams capped = params;
    capped.max_tokens = max_new_tokens;
    const std::string body =
        build_request_body(config_, prefix.empty() ? prompt.text : prefix, capped).dump();
    std::atomic<bool> no_cancel{false};
    StreamOutcome s = run_stream_once(config_, body, no_cancel);
    if (s.failed) throw JobFailed(s.error);
    Segment seg;
    seg.token_count = count_tokens(s.deltas, s.usage_completion_tokens).value;
    seg.text = std::move(s.text);
    seg.hit_eos = s.finish_reason != "length";
    return seg;
  }

  const ApiConfig& config() const { return config_; }

 private:
  ApiConfig config_;
  int continuation_calls_ = 0;
};

}  // namespace firstfinish
