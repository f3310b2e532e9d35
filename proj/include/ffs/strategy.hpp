#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ffs/answer.hpp"
#include "ffs/backend.hpp"
#include "ffs/errors.hpp"
#include "ffs/types.hpp"

namespace firstfinish {

namespace detail {

inline void parse_finished(Trace& trace, TaskKind task) {
  if (trace.finish_reason == FinishReason::Cancelled) {
    trace.parsed_answer = std::string(kNoAnswer);
    return;
  }
  trace.parsed_answer = parse_answer(task, trace.text).value;
}

inline long sum_tokens(const std::vector<Trace>& traces) {
  long total = 0;
  for (const auto& t : traces) total += t.token_count;
  return total;
}

/// Consume every remaining completion (typically after cancel_all) into
/// `traces`, keyed by job index.
inline void drain(JobGroup& group, std::map<int, Trace>& traces, TaskKind task) {
  while (group.remaining() > 0) {
    Completion c = group.next();
    if (c.failed) c.trace.finish_reason = FinishReason::Cancelled;
    parse_finished(c.trace, task);
    traces[c.job_index] = std::move(c.trace);
  }
}

inline std::vector<Trace> in_index_order(std::map<int, Trace>& by_index) {
  std::vector<Trace> out;
  out.reserve(by_index.size());
  for (auto& [idx, t] : by_index) out.push_back(std::move(t));
  return out;
}

}  // namespace detail

/// SD: one stochastic sample, no selection.
inline StrategyOutcome run_sd(Backend& backend, const PromptSpec& prompt,
                              const DecodeParams& params) {
  auto group = backend.launch(prompt, params, 1);
  Completion c = group->next();
  if (c.failed) throw StrategyError("sd: backend job failed: " + c.error);
  detail::parse_finished(c.trace, prompt.task);

  StrategyOutcome out;
  out.strategy = Strategy::Sd;
  out.chosen = c.trace;
  out.traces = {c.trace};
  out.sequential_tokens = c.trace.token_count;
  out.total_tokens = c.trace.token_count;
  out.answer = c.trace.parsed_answer;
  return out;
}

/// Sync-FFS: all n traces advance one token per lock-step batch step; the
/// first trace to emit EOS wins (lowest index on a tied step). If nothing
/// emits EOS within max_tokens steps, trace 1 is returned at the cap.
inline StrategyOutcome run_ffs_sync(Backend& backend, const PromptSpec& prompt,
                                    const DecodeParams& params) {
  if (!backend.supports_lockstep()) {
    throw UnsupportedBackend("UNSUPPORTED_BACKEND: " + backend.name() +
                             " cannot run lock-step FFS");
  }
  const int n = params.n_samples;
  auto batch = backend.launch_batch(prompt, params, n);

  int winner = -1;
  FinishReason winner_reason = FinishReason::LengthCap;
  for (long step = 1; step <= params.max_tokens && winner < 0; ++step) {
    const auto result = batch->step();
    for (int i = 0; i < n; ++i) {
      if (result.eos[i]) {
        winner = i;
        winner_reason = FinishReason::Eos;
        break;
      }
    }
  }
  if (winner < 0) winner = 0;  // fallback: trace 1 at the length cap

  StrategyOutcome out;
  out.strategy = Strategy::FfsSync;
  for (int i = 0; i < n; ++i) {
    Trace t = batch->finalize(i, i == winner ? winner_reason : FinishReason::Cancelled);
    if (i == winner) t.completion_order = 1;
    detail::parse_finished(t, prompt.task);
    out.traces.push_back(std::move(t));
  }
  out.chosen = out.traces[winner];
  out.sequential_tokens = out.chosen.token_count;
  out.total_tokens = detail::sum_tokens(out.traces);
  out.answer = out.chosen.parsed_answer;
  return out;
}

/// Async-FFS: n independent jobs race; the first to reach EOS or the length
/// cap wins and all others are interrupted. A failed front-runner drops out
/// of the race; only if every job fails is the strategy an error.
inline StrategyOutcome run_ffs_async(Backend& backend, const PromptSpec& prompt,
                                     const DecodeParams& params) {
  const int n = params.n_samples;
  auto group = backend.launch(prompt, params, n);

  std::map<int, Trace> by_index;
  Trace winner;
  bool have_winner = false;
  std::string last_error;
  for (int consumed = 0; consumed < n; ++consumed) {
    Completion c = group->next();
    if (c.failed) {
      last_error = c.error;
      c.trace.finish_reason = FinishReason::Cancelled;
      detail::parse_finished(c.trace, prompt.task);
      by_index[c.job_index] = std::move(c.trace);
      continue;
    }
    detail::parse_finished(c.trace, prompt.task);
    winner = c.trace;
    by_index[c.job_index] = std::move(c.trace);
    have_winner = true;
    break;
  }
  if (!have_winner) throw StrategyError("ffs: all jobs failed: " + last_error);

  group->cancel_all();
  detail::drain(*group, by_index, prompt.task);

  StrategyOutcome out;
  out.strategy = Strategy::FfsAsync;
  out.traces = detail::in_index_order(by_index);
  out.chosen = winner;
  out.sequential_tokens = winner.token_count;
  out.total_tokens = detail::sum_tokens(out.traces);
  out.answer = winner.parsed_answer;
  return out;
}

/// LFS: all n traces run to completion; the longest (latest-finishing) one is
/// selected, lower trace_id winning ties.
inline StrategyOutcome run_lfs(Backend& backend, const PromptSpec& prompt,
                               const DecodeParams& params) {
  const int n = params.n_samples;
  auto group = backend.launch(prompt, params, n);
  std::map<int, Trace> by_index;
  detail::drain(*group, by_index, prompt.task);

  StrategyOutcome out;
  out.strategy = Strategy::Lfs;
  out.traces = detail::in_index_order(by_index);

  const Trace* chosen = nullptr;
  for (const auto& t : out.traces) {
    if (t.finish_reason == FinishReason::Cancelled) continue;
    if (!chosen || t.token_count > chosen->token_count) chosen = &t;
  }
  if (!chosen) throw StrategyError("lfs: all jobs failed");
  out.chosen = *chosen;
  out.sequential_tokens = chosen->token_count;
  out.total_tokens = detail::sum_tokens(out.traces);
  out.answer = chosen->parsed_answer;
  return out;
}

/// MV: all n traces run to completion; the modal parsed answer wins, ties
/// going to the answer group containing the earliest finisher. The chosen
/// trace is the earliest-finishing carrier of the winning answer.
inline StrategyOutcome run_mv(Backend& backend, const PromptSpec& prompt,
                              const DecodeParams& params) {
  const int n = params.n_samples;
  auto group = backend.launch(prompt, params, n);
  std::map<int, Trace> by_index;
  detail::drain(*group, by_index, prompt.task);

  StrategyOutcome out;
  out.strategy = Strategy::Mv;
  out.traces = detail::in_index_order(by_index);

  // votes: answer -> (count, earliest completion order, carrier index)
  struct Vote {
    int count = 0;
    int earliest_order = 0;
    int carrier = -1;
  };
  std::map<std::string, Vote> votes;
  long max_tokens_seen = 0;
  const Trace* earliest_finisher = nullptr;
  for (std::size_t i = 0; i < out.traces.size(); ++i) {
    const Trace& t = out.traces[i];
    max_tokens_seen = std::max(max_tokens_seen, t.token_count);
    if (t.finish_reason == FinishReason::Cancelled) continue;
    if (!earliest_finisher ||
        t.completion_order.value_or(n + 1) < earliest_finisher->completion_order.value_or(n + 1)) {
      earliest_finisher = &t;
    }
    if (t.parsed_answer == kNoAnswer) continue;
    Vote& v = votes[t.parsed_answer];
    const int order = t.completion_order.value_or(n + 1);
    if (v.count == 0 || order < v.earliest_order) {
      v.earliest_order = order;
      v.carrier = static_cast<int>(i);
    }
    ++v.count;
  }
  if (!earliest_finisher) throw StrategyError("mv: all jobs failed");

  const Vote* best = nullptr;
  for (const auto& [answer, v] : votes) {
    if (!best || v.count > best->count ||
        (v.count == best->count && v.earliest_order < best->earliest_order)) {
      best = &v;
    }
  }
  if (best) {
    out.chosen = out.traces[best->carrier];
  } else {
    out.chosen = *earliest_finisher;  // vacuous vote: everything unparseable
  }
  out.answer = out.chosen.parsed_answer;
  out.sequential_tokens = max_tokens_seen;  // must wait for all traces
  out.total_tokens = detail::sum_tokens(out.traces);
  return out;
}

/// BF: a single trace whose early EOS is suppressed by appending "Wait"
/// (up to bf_max_forces times); at the budget boundary an answer-forcing
/// delimiter is appended and at most bf_answer_reserve further tokens decode.
inline StrategyOutcome run_bf(Backend& backend, const PromptSpec& prompt,
                              const DecodeParams& params) {
  if (!backend.supports_continuation()) {
    throw UnsupportedBackend("UNSUPPORTED_BACKEND: " + backend.name() +
                             " cannot continue from an extended prefix");
  }
  if (params.bf_answer_reserve >= params.max_tokens) {
    throw StrategyError("bf: bf_answer_reserve must be below max_tokens");
  }
  const long budget = params.max_tokens - params.bf_answer_reserve;

  std::string accumulated;
  long tokens = 0;
  int forces = 0;
  int segment = 0;
  FinishReason reason = FinishReason::LengthCap;
  bool natural_eos = false;
  while (tokens < budget) {
    Segment seg = backend.decode_segment(prompt, prompt.text + accumulated, params,
                                         budget - tokens, segment++);
    tokens += seg.token_count;
    accumulated += seg.text;
    if (seg.hit_eos) {
      if (forces < params.bf_max_forces && tokens < budget) {
        accumulated += "Wait";
        ++forces;
        continue;
      }
      natural_eos = true;
      reason = FinishReason::Eos;
      break;
    }
    break;  // budget boundary reached without EOS
  }
  if (!natural_eos) {
    accumulated += params.bf_delimiter;
    Segment seg = backend.decode_segment(prompt, prompt.text + accumulated, params,
                                         params.bf_answer_reserve, segment++);
    tokens += seg.token_count;
    accumulated += seg.text;
    reason = seg.hit_eos ? FinishReason::Eos : FinishReason::LengthCap;
  }

  Trace t;
  t.trace_id = 1;
  t.prompt_id = prompt.id;
  t.token_count = tokens;
  t.text = accumulated;
  t.finish_reason = reason;
  t.completion_order = 1;
  detail::parse_finished(t, prompt.task);

  StrategyOutcome out;
  out.strategy = Strategy::Bf;
  out.chosen = t;
  out.traces = {t};
  out.sequential_tokens = tokens;
  out.total_tokens = tokens;
  out.answer = t.parsed_answer;
  return out;
}

inline StrategyOutcome run_strategy(Strategy strategy, Backend& backend, const PromptSpec& prompt,
                                    const DecodeParams& params) {
  switch (strategy) {
    case Strategy::Sd: return run_sd(backend, prompt, params);
    case Strategy::FfsSync: return run_ffs_sync(backend, prompt, params);
    case Strategy::FfsAsync: return run_ffs_async(backend, prompt, params);
    case Strategy::Lfs: return run_lfs(backend, prompt, params);
    case Strategy::Mv: return run_mv(backend, prompt, params);
    case Strategy::Bf: return run_bf(backend, prompt, params);
  }
  throw StrategyError("unknown strategy");
}

}  // namespace firstfinish
