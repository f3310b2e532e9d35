#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <chrono>
#include <thread>

#include <httplib.h>

#include "ffs/http_backend.hpp"
#include "ffs/strategy.hpp"

using namespace firstfinish;

namespace {

ApiConfig test_config(int port) {
  ApiConfig c;
  c.base_url = "http://127.0.0.1:" + std::to_string(port);
  c.api_key = "test-key";
  c.model_name = "test-model";
  c.max_retries = 2;
  c.retry_base_delay_s = 0.01;
  c.request_timeout_s = 10.0;
  return c;
}

/// Local OpenAI-compatible stub. Each test installs one handler.
struct StubServer {
  httplib::Server server;
  int port = 0;
  std::thread thread;

  explicit StubServer(httplib::Server::Handler handler) {
    server.Post("/v1/chat/completions", std::move(handler));
    port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~StubServer() {
    server.stop();
    thread.join();
  }
};

std::string delta_frame(const std::string& content) {
  nlohmann::json j{{"choices", {{{"delta", {{"content", content}}}}}}};
  return "data: " + j.dump() + "\n\n";
}

std::string finish_frame(const std::string& reason, std::optional<long> completion_tokens = {}) {
  nlohmann::json j{{"choices", {{{"delta", nlohmann::json::object()},
                                 {"finish_reason", reason}}}}};
  if (completion_tokens) j["usage"] = {{"completion_tokens", *completion_tokens}};
  return "data: " + j.dump() + "\n\ndata: [DONE]\n\n";
}

}  // namespace

TEST_CASE("sse parser splits events across arbitrary chunk boundaries") {
  SseParser p;
  const std::string stream =
      "data: one\n\ndata:two\r\n\r\ndata: [DONE]\n\n";
  // Feed one byte at a time: payloads must come out identical.
  std::vector<std::string> got;
  for (char c : stream) {
    for (auto& s : p.feed(&c, 1)) got.push_back(s);
  }
  // CRLF-delimited events: "\r\n\r\n" contains one "\n\n" boundary after \r strip.
  REQUIRE(got.size() == 3);
  CHECK(got[0] == "one");
  CHECK(got[1] == "two");
  CHECK(got[2] == "[DONE]");
}

TEST_CASE("sse parser ignores comments and buffers incomplete events") {
  SseParser p;
  const std::string head = ": keepalive\n\ndata: part";
  auto first = p.feed(head.data(), head.size());
  CHECK(first.empty());
  auto second = p.feed("ial\n\n", 5);
  REQUIRE(second.size() == 1);
  CHECK(second[0] == "partial");
}

TEST_CASE("request body serializes to the golden fixture") {
  ApiConfig c;
  c.model_name = "deepseek-r1";
  DecodeParams params;  // defaults: temperature 0.6, top_p 0.95, max_tokens 32768
  const std::string body = build_request_body(c, "What is 2+2?", params).dump();
  CHECK(body ==
        R"({"max_tokens":32768,"messages":[{"content":"What is 2+2?","role":"user"}],)"
        R"("model":"deepseek-r1","stream":true,"temperature":0.6,"top_p":0.95})");
}

TEST_CASE("token count prefers provider usage and flags approximation") {
  const TokenCount exact = count_tokens(7, 123);
  CHECK(exact.value == 123);
  CHECK_FALSE(exact.approximate);
  const TokenCount approx = count_tokens(7, std::nullopt);
  CHECK(approx.value == 7);
  CHECK(approx.approximate);
}

TEST_CASE("streamed deltas accumulate into an EOS trace") {
  std::string seen_body, seen_auth;
  StubServer stub([&](const httplib::Request& req, httplib::Response& res) {
    seen_body = req.body;
    seen_auth = req.get_header_value("Authorization");
    res.set_content(delta_frame("The answer") + delta_frame(" is ") +
                        delta_frame("\\boxed{042}.") + finish_frame("stop"),
                    "text/event-stream");
  });
  const ApiConfig config = test_config(stub.port);
  DecodeParams params;
  const std::string body = build_request_body(config, "q", params).dump();
  std::atomic<bool> cancel{false};
  const StreamOutcome out = run_stream_once(config, body, cancel);
  CHECK_FALSE(out.failed);
  CHECK(out.done);
  CHECK(out.deltas == 3);
  CHECK(out.text == "The answer is \\boxed{042}.");
  CHECK(out.finish_reason == "stop");
  CHECK(seen_body == body);
  CHECK(seen_auth == "Bearer test-key");
}

TEST_CASE("provider usage overrides the approximate delta count") {
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    res.set_content(delta_frame("x") + finish_frame("stop", 57), "text/event-stream");
  });
  const ApiConfig config = test_config(stub.port);
  std::atomic<bool> cancel{false};
  const StreamOutcome out =
      run_stream_once(config, build_request_body(config, "q", {}).dump(), cancel);
  REQUIRE(out.usage_completion_tokens.has_value());
  CHECK(count_tokens(out.deltas, out.usage_completion_tokens).value == 57);
}

TEST_CASE("finish_reason length maps to LENGTH_CAP and NO_ANSWER") {
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    res.set_content(delta_frame("unfinished reasoning") + finish_frame("length"),
                    "text/event-stream");
  });
  HttpBackend backend(test_config(stub.port));
  DecodeParams params;
  const StrategyOutcome out = run_sd(backend, PromptSpec{"q1", "prompt", TaskKind::AimeNumeric},
                                     params);
  CHECK(out.chosen.finish_reason == FinishReason::LengthCap);
  CHECK(out.answer == kNoAnswer);
}

TEST_CASE("cancellation aborts the stream and freezes the partial count") {
  std::atomic<long> frames_sent{0};
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    res.set_chunked_content_provider(
        "text/event-stream", [&](std::size_t, httplib::DataSink& sink) {
          for (int i = 0; i < 500; ++i) {
            const std::string frame = delta_frame("t" + std::to_string(i));
            if (!sink.write(frame.data(), frame.size())) return false;  // client hung up
            ++frames_sent;
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
          }
          sink.done();
          return true;
        });
  });
  const ApiConfig config = test_config(stub.port);
  std::atomic<bool> cancel{false};
  StreamOutcome out;
  std::thread consumer([&] {
    out = run_stream_once(config, build_request_body(config, "q", {}).dump(), cancel);
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(60));
  cancel.store(true);
  consumer.join();
  CHECK(out.cancelled);
  CHECK_FALSE(out.done);
  CHECK(out.deltas < 500);
  const long deltas_at_return = out.deltas;
  // No events arrive after cancellation resolves.
  std::this_thread::sleep_for(std::chrono::milliseconds(100));
  CHECK(out.deltas == deltas_at_return);
}

TEST_CASE("4xx fails immediately without retry") {
  std::atomic<int> requests{0};
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    ++requests;
    res.status = 401;
    res.set_content("{\"error\":\"bad key\"}", "application/json");
  });
  const ApiConfig config = test_config(stub.port);
  std::atomic<bool> cancel{false};
  const StreamOutcome out =
      run_stream_once(config, build_request_body(config, "q", {}).dump(), cancel);
  CHECK(out.failed);
  CHECK(out.error.find("JOB_FAILED") != std::string::npos);
  CHECK(requests.load() == 1);
}

TEST_CASE("5xx retries with backoff then succeeds") {
  std::atomic<int> requests{0};
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    if (++requests <= 2) {
      res.status = 503;
      return;
    }
    res.set_content(delta_frame("ok") + finish_frame("stop"), "text/event-stream");
  });
  const ApiConfig config = test_config(stub.port);
  std::atomic<bool> cancel{false};
  const StreamOutcome out =
      run_stream_once(config, build_request_body(config, "q", {}).dump(), cancel);
  CHECK_FALSE(out.failed);
  CHECK(out.text == "ok");
  CHECK(requests.load() == 3);
}

TEST_CASE("5xx exhausting retries reports failure") {
  std::atomic<int> requests{0};
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    ++requests;
    res.status = 500;
  });
  const ApiConfig config = test_config(stub.port);
  std::atomic<bool> cancel{false};
  const StreamOutcome out =
      run_stream_once(config, build_request_body(config, "q", {}).dump(), cancel);
  CHECK(out.failed);
  CHECK(requests.load() == 3);  // initial try + max_retries
}

TEST_CASE("malformed stream frame fails with frame context") {
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    res.set_content("data: {not json\n\n", "text/event-stream");
  });
  const ApiConfig config = test_config(stub.port);
  std::atomic<bool> cancel{false};
  const StreamOutcome out =
      run_stream_once(config, build_request_body(config, "q", {}).dump(), cancel);
  CHECK(out.failed);
  CHECK(out.error.find("malformed") != std::string::npos);
  CHECK(out.error.find("{not json") != std::string::npos);
}

TEST_CASE("http job group races streams and cancels losers") {
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    res.set_content(delta_frame("a") + delta_frame("b") + finish_frame("stop"),
                    "text/event-stream");
  });
  HttpBackend backend(test_config(stub.port));
  DecodeParams params;
  const StrategyOutcome out =
      run_ffs_async(backend, PromptSpec{"q", "prompt", TaskKind::AimeNumeric}, params);
  REQUIRE(out.traces.size() == 4);
  CHECK(out.chosen.completion_order == 1);
  CHECK(out.chosen.finish_reason == FinishReason::Eos);
  long total = 0;
  for (const auto& t : out.traces) total += t.token_count;
  CHECK(out.total_tokens == total);
  CHECK(out.sequential_tokens == out.chosen.token_count);
}

TEST_CASE("http backend declines lock-step and gated continuation") {
  ApiConfig config = test_config(1);  // never contacted
  HttpBackend backend(config);
  CHECK_FALSE(backend.supports_lockstep());
  CHECK_FALSE(backend.supports_continuation());
  DecodeParams params;
  CHECK_THROWS_AS(backend.launch_batch(PromptSpec{"q", "p", TaskKind::AimeNumeric}, params, 4),
                  UnsupportedBackend);
  CHECK_THROWS_AS(
      backend.decode_segment(PromptSpec{"q", "p", TaskKind::AimeNumeric}, "", params, 16, 0),
      UnsupportedBackend);
}

TEST_CASE("api config from_env requires the key and never stores it in the body") {
  // FFS_API_KEY intentionally not set in the test environment here.
  const char* saved = std::getenv("FFS_API_KEY");
  if (!saved) {
    CHECK_THROWS_WITH(ApiConfig::from_env("m"), Catch::Matchers::ContainsSubstring("FFS_API_KEY"));
  }
  ApiConfig c;
  c.api_key = "super-secret";
  c.model_name = "m";
  const std::string body = build_request_body(c, "prompt", {}).dump();
  CHECK(body.find("super-secret") == std::string::npos);
}
