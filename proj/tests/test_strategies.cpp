#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "ffs/sim_backend.hpp"
#include "ffs/strategy.hpp"

using namespace firstfinish;

namespace {

// Fully scripted traces: fixed lengths, correctness, and per-trace answers.
class ScriptedBackend : public SimulatedBackend {
 public:
  struct Script {
    long length = 0;
    bool has_eos = true;
    std::string answer;
  };

  ScriptedBackend(std::vector<Script> scripts, LengthProfile profile = LengthProfile{})
      : SimulatedBackend(profile, 0), scripts_(std::move(scripts)) {}

  SampledTrace sample_trace(const PromptSpec& prompt, int trace_index,
                            const DecodeParams&) const override {
    const Script& s = scripts_.at(trace_index);
    SampledTrace out;
    out.length = s.length;
    out.has_eos = s.has_eos;
    out.answer = s.answer;
    out.correct = s.answer == ground_truth(prompt);
    return out;
  }

 private:
  std::vector<Script> scripts_;
};

const PromptSpec kPrompt{"q1", "problem text", TaskKind::AimeNumeric};

DecodeParams params_n(int n) {
  DecodeParams p;
  p.n_samples = n;
  p.seed = 7;
  return p;
}

bool same_trace(const Trace& a, const Trace& b) {
  return a.trace_id == b.trace_id && a.token_count == b.token_count &&
         a.finish_reason == b.finish_reason && a.parsed_answer == b.parsed_answer &&
         a.text == b.text;
}

}  // namespace

TEST_CASE("run_sd: single trace, sequential equals total") {
  LengthProfile p;
  p.alpha = 1.0;
  SimulatedBackend backend(p, 7);
  backend.add_question("q1", "042");
  const auto out = run_sd(backend, kPrompt, params_n(1));
  CHECK(out.traces.size() == 1);
  CHECK(out.answer == "042");
  CHECK(out.chosen.finish_reason == FinishReason::Eos);
  CHECK(out.sequential_tokens == out.chosen.token_count);
  CHECK(out.total_tokens == out.chosen.token_count);

  // seeded run repeated twice: identical outcome
  const auto again = run_sd(backend, kPrompt, params_n(1));
  CHECK(same_trace(out.chosen, again.chosen));
  CHECK(out.total_tokens == again.total_tokens);
}

TEST_CASE("run_sd: length above cap yields LENGTH_CAP and NO_ANSWER") {
  ScriptedBackend backend({{999999, false, "042"}});
  const auto out = run_sd(backend, kPrompt, params_n(1));
  CHECK(out.chosen.finish_reason == FinishReason::LengthCap);
  CHECK(out.answer == std::string(kNoAnswer));
}

TEST_CASE("run_ffs_sync: lock-step race stops everyone at the first EOS") {
  ScriptedBackend backend({{12000, true, "001"}, {8000, true, "042"},
                           {15000, true, "003"}, {9000, true, "004"}});
  backend.add_question("q1", "042");
  const auto out = run_ffs_sync(backend, kPrompt, params_n(4));
  CHECK(out.chosen.trace_id == 2);
  CHECK(out.answer == "042");
  CHECK(out.sequential_tokens == 8000);
  CHECK(out.total_tokens == 4 * 8000);  // all traces stopped at step 8000
  for (const auto& t : out.traces) {
    CHECK(t.token_count == 8000);
    if (t.trace_id != 2) {
      CHECK(t.finish_reason == FinishReason::Cancelled);
      CHECK_FALSE(t.completion_order.has_value());
    }
  }
  CHECK(out.chosen.completion_order == 1);
}

TEST_CASE("run_ffs_sync: all traces beyond the cap fall back to trace 1") {
  DecodeParams params = params_n(4);
  params.max_tokens = 1000;
  ScriptedBackend backend({{2000, true, "001"}, {3000, true, "002"},
                           {4000, true, "003"}, {5000, true, "004"}});
  const auto out = run_ffs_sync(backend, kPrompt, params);
  CHECK(out.chosen.trace_id == 1);
  CHECK(out.chosen.finish_reason == FinishReason::LengthCap);
  CHECK(out.sequential_tokens == 1000);
  CHECK(out.total_tokens == 4000);
  CHECK(out.answer == std::string(kNoAnswer));
}

TEST_CASE("run_ffs_async: winner cancels the rest") {
  ScriptedBackend backend({{12000, true, "001"}, {8000, true, "042"},
                           {15000, true, "003"}, {9000, true, "004"}});
  backend.add_question("q1", "042");
  const auto out = run_ffs_async(backend, kPrompt, params_n(4));
  CHECK(out.chosen.trace_id == 2);
  CHECK(out.sequential_tokens == 8000);
  CHECK(out.total_tokens == 4 * 8000);  // uniform decode rate accounting identity
  int cancelled = 0;
  for (const auto& t : out.traces) {
    if (t.finish_reason == FinishReason::Cancelled) {
      ++cancelled;
      CHECK(t.token_count == 8000);
      CHECK(t.parsed_answer == std::string(kNoAnswer));
    }
  }
  CHECK(cancelled == 3);
}

TEST_CASE("run_ffs_async: capped winner is returned as-is") {
  DecodeParams params = params_n(2);
  params.max_tokens = 500;
  ScriptedBackend backend({{800, true, "001"}, {900, true, "002"}});
  const auto out = run_ffs_async(backend, kPrompt, params);
  CHECK(out.chosen.trace_id == 1);
  CHECK(out.chosen.finish_reason == FinishReason::LengthCap);
  CHECK(out.answer == std::string(kNoAnswer));
}

TEST_CASE("run_lfs: last finisher wins; ties go to the lower trace id") {
  ScriptedBackend backend({{12000, true, "001"}, {8000, true, "042"},
                           {15000, true, "003"}, {9000, true, "004"}});
  const auto out = run_lfs(backend, kPrompt, params_n(4));
  CHECK(out.chosen.trace_id == 3);
  CHECK(out.sequential_tokens == 15000);
  CHECK(out.total_tokens == 44000);
  CHECK(out.answer == "003");

  ScriptedBackend tied({{9000, true, "001"}, {9000, true, "002"}});
  const auto t = run_lfs(tied, kPrompt, params_n(2));
  CHECK(t.chosen.trace_id == 1);
}

TEST_CASE("run_mv: plurality, tie-break, and vacuous vote") {
  ScriptedBackend backend({{5000, true, "042"}, {6000, true, "042"},
                           {7000, true, "007"}, {900000, false, "042"}});
  const auto out = run_mv(backend, kPrompt, params_n(4));
  CHECK(out.answer == "042");
  CHECK(out.sequential_tokens == 32768);  // waits for the capped trace
  CHECK(out.chosen.trace_id == 1);        // earliest finisher carrying "042"

  // tie {042,042,007,007}: earliest-finishing trace among tied groups
  ScriptedBackend tie({{5000, true, "007"}, {6000, true, "042"},
                       {7000, true, "042"}, {8000, true, "007"}});
  const auto t = run_mv(tie, kPrompt, params_n(4));
  CHECK(t.answer == "007");
  CHECK(t.chosen.trace_id == 1);

  // all capped: vacuous vote
  ScriptedBackend capped({{900000, false, "001"}, {900000, false, "002"}});
  const auto v = run_mv(capped, kPrompt, params_n(2));
  CHECK(v.answer == std::string(kNoAnswer));
}

TEST_CASE("degenerate equivalence: n=1 matches SD for every racing strategy") {
  LengthProfile p;
  SimulatedBackend backend(p, 99);
  backend.add_question("q1", "042");
  const auto params = params_n(1);
  const auto sd = run_sd(backend, kPrompt, params);
  for (Strategy s : {Strategy::FfsSync, Strategy::FfsAsync, Strategy::Lfs, Strategy::Mv}) {
    const auto out = run_strategy(s, backend, kPrompt, params);
    INFO(to_string(s));
    CHECK(same_trace(out.chosen, sd.chosen));
    CHECK(out.sequential_tokens == sd.sequential_tokens);
    CHECK(out.total_tokens == sd.total_tokens);
    CHECK(out.answer == sd.answer);
  }
}

TEST_CASE("cost ordering invariants on a fixed trace set") {
  ScriptedBackend backend({{12000, true, "001"}, {8000, true, "042"},
                           {15000, true, "003"}, {9000, true, "004"}});
  const auto ffs = run_ffs_async(backend, kPrompt, params_n(4));
  const auto lfs = run_lfs(backend, kPrompt, params_n(4));
  const auto mv = run_mv(backend, kPrompt, params_n(4));
  CHECK(ffs.sequential_tokens <= mv.sequential_tokens);
  CHECK(mv.sequential_tokens == lfs.sequential_tokens);
  CHECK(mv.total_tokens == lfs.total_tokens);
  CHECK(ffs.total_tokens <= mv.total_tokens);
  CHECK(ffs.sequential_tokens <= ffs.total_tokens);
}

TEST_CASE("run_bf: forced continuations then natural end") {
  // natural EOS at 5K, budget 32K - 3K, max_forces 2: two Wait continuations
  LengthProfile p;
  p.alpha = 1.0;
  p.mu1 = 5000;
  p.sigma1 = 1.0;
  p.mu2 = 5000;
  p.sigma2 = 1.0;
  SimulatedBackend backend(p, 3);
  backend.add_question("q1", "042");
  DecodeParams params = params_n(1);
  params.bf_max_forces = 2;
  const auto out = run_bf(backend, kPrompt, params);
  CHECK(out.chosen.finish_reason == FinishReason::Eos);
  std::size_t waits = 0, pos = 0;
  while ((pos = out.chosen.text.find("Wait", pos)) != std::string::npos) {
    ++waits;
    pos += 4;
  }
  CHECK(waits == 2);
  CHECK(out.answer == "042");
  CHECK(out.sequential_tokens == out.total_tokens);
  CHECK(out.chosen.token_count <= params.max_tokens);
}

TEST_CASE("run_bf: no EOS by the budget boundary forces the answer delimiter") {
  LengthProfile p;
  p.alpha = 1.0;
  p.mu1 = 1e9;  // never finishes naturally
  p.sigma1 = 1.0;
  p.mu2 = 1e9;
  p.sigma2 = 1.0;
  p.cap = 32768;
  SimulatedBackend backend(p, 3);
  backend.add_question("q1", "042");
  DecodeParams params = params_n(1);
  const auto out = run_bf(backend, kPrompt, params);
  CHECK(out.chosen.text.find(params.bf_delimiter) != std::string::npos);
  CHECK(out.chosen.token_count <= params.max_tokens);
  CHECK(out.chosen.token_count >= params.max_tokens - params.bf_answer_reserve);
  CHECK(out.answer == "042");  // forced answer segment
}

TEST_CASE("run_bf: zero forces accepts the first natural EOS") {
  LengthProfile p;
  p.alpha = 1.0;
  p.mu1 = 5000;
  p.sigma1 = 1.0;
  p.mu2 = 5000;
  p.sigma2 = 1.0;
  SimulatedBackend backend(p, 3);
  backend.add_question("q1", "042");
  DecodeParams params = params_n(1);
  params.bf_max_forces = 0;
  const auto out = run_bf(backend, kPrompt, params);
  CHECK(out.chosen.text.find("Wait") == std::string::npos);
  CHECK(out.chosen.finish_reason == FinishReason::Eos);
  CHECK(out.answer == "042");
}

TEST_CASE("strategy errors") {
  LengthProfile p;
  SimulatedBackend backend(p, 1);
  DecodeParams params = params_n(1);
  params.bf_answer_reserve = params.max_tokens;
  CHECK_THROWS_AS(run_bf(backend, kPrompt, params), StrategyError);
}

TEST_CASE("determinism across repeated seeded runs for every strategy") {
  LengthProfile p;
  SimulatedBackend backend(p, 2024);
  backend.add_question("q1", "042");
  for (Strategy s : {Strategy::Sd, Strategy::FfsSync, Strategy::FfsAsync, Strategy::Lfs,
                     Strategy::Mv, Strategy::Bf}) {
    const auto a = run_strategy(s, backend, kPrompt, params_n(4));
    const auto b = run_strategy(s, backend, kPrompt, params_n(4));
    INFO(to_string(s));
    CHECK(same_trace(a.chosen, b.chosen));
    CHECK(a.total_tokens == b.total_tokens);
    CHECK(a.sequential_tokens == b.sequential_tokens);
    CHECK(a.answer == b.answer);
  }
}

TEST_CASE("monotone latency scaling: mean FFS sequential tokens non-increasing in n") {
  LengthProfile p;
  SimulatedBackend backend(p, 5);
  const int kQuestions = 300;
  double prev_mean = 1e18;
  for (int n : {1, 2, 4, 8, 16}) {
    DecodeParams params = params_n(n);
    double sum = 0.0;
    for (int q = 0; q < kQuestions; ++q) {
      PromptSpec prompt{"q" + std::to_string(q), "text", TaskKind::AimeNumeric};
      sum += static_cast<double>(run_ffs_async(backend, prompt, params).sequential_tokens);
    }
    const double mean = sum / kQuestions;
    CHECK(mean <= prev_mean);
    prev_mean = mean;
  }
}
