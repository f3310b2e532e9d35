#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "ffs/backend.hpp"
#include "ffs/profile.hpp"
#include "ffs/rng.hpp"

namespace firstfinish {

/// Deterministic wrong answer: never collides with the truth.
inline std::string wrong_answer(const std::string& truth, TaskKind task) {
  if (task == TaskKind::McOption) {
    const char c = truth.empty() ? 'A' : truth[0];
    return std::string(1, static_cast<char>('A' + (c - 'A' + 1) % 4));
  }
  const int v = (std::stoi(truth) + 1) % 1000;
  char buf[4];
  std::snprintf(buf, sizeof buf, "%03d", v);
  return std::string(buf);
}

/// One predetermined simulated decoding.
struct SampledTrace {
  bool correct = false;
  long length = 0;    // clamped to [1, cap]
  bool has_eos = false;  // false when the raw draw hit the context cap
  std::string answer;    // truth or a deterministic wrong answer
};

/// Oracle backend whose trace lengths follow the two-Gaussian correct vs
/// incorrect mixture. Everything (lengths, answers, event order) is a pure
/// function of (seed, profile, prompt id, trace index), so races replay
/// bit-exactly. A virtual clock stands in for wall time: one token per tick
/// at the default uniform rate.
class SimulatedBackend : public Backend {
 public:
  SimulatedBackend(LengthProfile profile, std::uint64_t seed)
      : profile_(profile), seed_(seed) {
    profile_.validate();
  }

  std::string name() const override { return "simulated"; }
  bool supports_lockstep() const override { return true; }
  bool supports_continuation() const override { return true; }

  void add_question(const std::string& prompt_id, std::string ground_truth) {
    truths_[prompt_id] = std::move(ground_truth);
  }

  /// Per-job decode rates in tokens per virtual tick, for skew experiments.
  /// Applies to subsequently launched groups; empty means uniform rate 1.
  void set_job_rates(std::vector<double> rates) { job_rates_ = std::move(rates); }

  const LengthProfile& profile() const { return profile_; }

  std::string ground_truth(const PromptSpec& prompt) const {
    auto it = truths_.find(prompt.id);
    if (it != truths_.end()) return it->second;
    // Unregistered question: synthesize a stable truth from the id.
    if (prompt.task == TaskKind::McOption) {
      return std::string(1, static_cast<char>('A' + hash_label(prompt.id) % 4));
    }
    char buf[4];
    std::snprintf(buf, sizeof buf, "%03llu",
                  static_cast<unsigned long long>(hash_label(prompt.id) % 1000));
    return std::string(buf);
  }

  /// Draw trace `trace_index` for this prompt. Lengths are rounded to the
  /// nearest token and clamped to [1, cap]; a draw at or above the cap has
  /// no EOS and therefore no room for a boxed answer.
  ///
  /// Correctness uses rotation (stratified) sampling: with a per-prompt
  /// phase u ~ U(0,1), trace i is correct iff frac(u + i*alpha) < alpha.
  /// Each trace is marginally correct with probability alpha, but any n
  /// consecutive traces carry within one of n*alpha correct ones, so a
  /// race's composition matches the mixture proportion instead of drifting
  /// binomially.
  virtual SampledTrace sample_trace(const PromptSpec& prompt, int trace_index,
                                    const DecodeParams& params) const {
    RngStream stream =
        RngStream(params.seed.value_or(seed_)).substream(prompt.id).substream(
            static_cast<std::uint64_t>(trace_index));
    const double phase = RngStream(params.seed.value_or(seed_))
                             .substream(prompt.id)
                             .substream("mix-phase")
                             .uniform();
    double rot = phase + trace_index * profile_.alpha;
    rot -= std::floor(rot);
    SampledTrace s;
    s.correct = rot < profile_.alpha;
    const double raw =
        s.correct ? stream.normal(profile_.mu1, profile_.sigma1)
                  : stream.normal(profile_.mu2, profile_.sigma2);
    const long rounded = std::llround(raw);
    s.has_eos = rounded < profile_.cap;
    s.length = std::clamp(rounded, 1L, profile_.cap);
    const std::string truth = ground_truth(prompt);
    s.answer = s.correct ? truth : wrong_answer(truth, prompt.task);
    return s;
  }

  std::unique_ptr<JobGroup> launch(const PromptSpec& prompt, const DecodeParams& params,
                                   int n_jobs) override;

  std::unique_ptr<BatchStepper> launch_batch(const PromptSpec& prompt, const DecodeParams& params,
                                             int n_jobs) override;

  Segment decode_segment(const PromptSpec& prompt, const std::string& prefix,
                         const DecodeParams& params, long max_new_tokens,
                         int segment_index) override {
    if (max_new_tokens <= 0) return {0, "", false};
    RngStream stream = RngStream(params.seed.value_or(seed_))
                           .substream(prompt.id)
                           .substream("bf")
                           .substream(static_cast<std::uint64_t>(segment_index));
    const std::string truth = ground_truth(prompt);
    Segment seg;
    if (prefix.size() >= params.bf_delimiter.size() &&
        prefix.compare(prefix.size() - params.bf_delimiter.size(), std::string::npos,
                       params.bf_delimiter) == 0) {
      // Forced-answer segment: a short direct answer, correct w.p. alpha.
      const bool correct = stream.uniform() < profile_.alpha;
      const std::string ans = correct ? truth : wrong_answer(truth, prompt.task);
      constexpr long kAnswerTokens = 8;
      if (kAnswerTokens <= max_new_tokens) {
        seg.token_count = kAnswerTokens;
        seg.text = " The answer is \\boxed{" + ans + "}.";
        seg.hit_eos = true;
      } else {
        seg.token_count = max_new_tokens;
        seg.text = " The answer";
        seg.hit_eos = false;
      }
      return seg;
    }
    // Ordinary continuation: a fresh mixture draw for this segment.
    const bool correct = stream.uniform() < profile_.alpha;
    const double raw = correct ? stream.normal(profile_.mu1, profile_.sigma1)
                               : stream.normal(profile_.mu2, profile_.sigma2);
    const long rounded = std::llround(raw);
    const bool has_eos = rounded < profile_.cap;
    const long len = std::clamp(rounded, 1L, profile_.cap);
    seg.hit_eos = has_eos && len <= max_new_tokens;
    seg.token_count = std::min(len, max_new_tokens);
    const std::string ans = correct ? truth : wrong_answer(truth, prompt.task);
    seg.text = render_text(seg.token_count, seg.hit_eos, ans);
    return seg;
  }

  /// Synthetic filler ending in a well-formed boxed answer so the real
  /// parsers run end to end. Capped traces carry no box.
  static std::string render_text(long token_count, bool eos, const std::string& answer) {
    std::string text;
    const long filler = std::min<long>(token_count, 32);
    for (long i = 0; i < filler; ++i) text += "step ";
    if (eos) {
      text += "Therefore, the final answer is \\boxed{" + answer + "}.";
    }
    return text;
  }

 private:
  friend class SimJobGroup;
  friend class SimBatchStepper;

  LengthProfile profile_;
  std::uint64_t seed_;
  std::map<std::string, std::string> truths_;
  std::vector<double> job_rates_;
};

/// Virtual-clock race over n predetermined traces. Arrival order is finish
/// tick, ties broken by lowest job index.
class SimJobGroup : public JobGroup {
 public:
  SimJobGroup(const SimulatedBackend& backend, const PromptSpec& prompt,
              const DecodeParams& params, int n_jobs, std::vector<double> rates)
      : prompt_(prompt) {
    jobs_.reserve(n_jobs);
    for (int j = 0; j < n_jobs; ++j) {
      const SampledTrace s = backend.sample_trace(prompt, j, params);
      Job job;
      job.rate = j < static_cast<int>(rates.size()) ? rates[j] : 1.0;
      if (job.rate <= 0.0) throw std::invalid_argument("job rate must be > 0");
      job.final_tokens = std::min(s.length, params.max_tokens);
      job.reason = (s.has_eos && s.length <= params.max_tokens) ? FinishReason::Eos
                                                                : FinishReason::LengthCap;
      job.finish_tick = static_cast<long>(
          std::ceil(static_cast<double>(job.final_tokens) / job.rate));
      job.text = SimulatedBackend::render_text(job.final_tokens,
                                               job.reason == FinishReason::Eos, s.answer);
      jobs_.push_back(std::move(job));
    }
  }

  Completion next() override {
    int best = -1;
    long best_arrival = 0;
    for (int j = 0; j < static_cast<int>(jobs_.size()); ++j) {
      if (jobs_[j].consumed) continue;
      const long arrival = jobs_[j].cancelled ? jobs_[j].cancel_tick : jobs_[j].finish_tick;
      if (best < 0 || arrival < best_arrival) {
        best = j;
        best_arrival = arrival;
      }
    }
    if (best < 0) throw std::logic_error("SimJobGroup: no completions remaining");
    Job& job = jobs_[best];
    job.consumed = true;
    now_ = std::max(now_, best_arrival);

    Completion c;
    c.job_index = best;
    c.trace.trace_id = best + 1;
    c.trace.prompt_id = prompt_.id;
    if (job.cancelled) {
      c.trace.finish_reason = FinishReason::Cancelled;
      c.trace.token_count = job.tokens_at_cancel;
      const long filler = std::min<long>(job.tokens_at_cancel, 32);
      for (long i = 0; i < filler; ++i) c.trace.text += "step ";
    } else {
      c.trace.finish_reason = job.reason;
      c.trace.token_count = job.final_tokens;
      c.trace.text = job.text;
      c.trace.completion_order = ++order_counter_;
    }
    return c;
  }

  void cancel_all() override {
    for (auto& job : jobs_) cancel_job(job);
  }

  /// Cancel one job at the current virtual time; no-op if already finished.
  void cancel(int index) { cancel_job(jobs_.at(index)); }

  /// Move the virtual clock forward without consuming a completion.
  void advance_clock(long tick) { now_ = std::max(now_, tick); }

  int remaining() const override {
    int r = 0;
    for (const auto& job : jobs_) r += job.consumed ? 0 : 1;
    return r;
  }

  long now() const { return now_; }

 private:
  struct Job {
    double rate = 1.0;
    long final_tokens = 0;
    long finish_tick = 0;
    FinishReason reason = FinishReason::Eos;
    std::string text;
    bool cancelled = false;
    long cancel_tick = 0;
    long tokens_at_cancel = 0;
    bool consumed = false;
  };

  void cancel_job(Job& job) {
    if (job.consumed || job.cancelled) return;
    if (job.finish_tick <= now_) return;  // already finished; cancel is a no-op
    job.cancelled = true;
    job.cancel_tick = now_;
    job.tokens_at_cancel =
        std::min(job.final_tokens, static_cast<long>(std::floor(job.rate * now_)));
  }

  PromptSpec prompt_;
  std::vector<Job> jobs_;
  long now_ = 0;
  int order_counter_ = 0;
};

/// Lock-step batch over n predetermined traces; one token per trace per step.
class SimBatchStepper : public BatchStepper {
 public:
  SimBatchStepper(const SimulatedBackend& backend, const PromptSpec& prompt,
                  const DecodeParams& params, int n_jobs)
      : prompt_(prompt) {
    for (int j = 0; j < n_jobs; ++j) samples_.push_back(backend.sample_trace(prompt, j, params));
  }

  StepResult step() override {
    ++step_count_;
    StepResult r;
    r.eos.resize(samples_.size(), 0);
    for (std::size_t j = 0; j < samples_.size(); ++j) {
      if (samples_[j].has_eos && samples_[j].length == step_count_) r.eos[j] = 1;
    }
    return r;
  }

  int batch_size() const override { return static_cast<int>(samples_.size()); }

  Trace finalize(int index, FinishReason reason) override {
    const SampledTrace& s = samples_.at(index);
    Trace t;
    t.trace_id = index + 1;
    t.prompt_id = prompt_.id;
    t.token_count = step_count_;
    t.finish_reason = reason;
    t.text = SimulatedBackend::render_text(step_count_, reason == FinishReason::Eos, s.answer);
    return t;
  }

  long steps() const { return step_count_; }

 private:
  PromptSpec prompt_;
  std::vector<SampledTrace> samples_;
  long step_count_ = 0;
};

inline std::unique_ptr<JobGroup> SimulatedBackend::launch(const PromptSpec& prompt,
                                                          const DecodeParams& params,
                                                          int n_jobs) {
  return std::make_unique<SimJobGroup>(*this, prompt, params, n_jobs, job_rates_);
}

inline std::unique_ptr<BatchStepper> SimulatedBackend::launch_batch(const PromptSpec& prompt,
                                                                    const DecodeParams& params,
                                                                    int n_jobs) {
  return std::make_unique<SimBatchStepper>(*this, prompt, params, n_jobs);
}

}  // namespace firstfinish
