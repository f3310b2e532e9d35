#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ffs/errors.hpp"
#include "ffs/types.hpp"

namespace firstfinish {

/// One consumed job completion. `trace` is present even on failure or
/// cancellation (it then carries the partial token count).
struct Completion {
  int job_index = 0;
  Trace trace;
  bool failed = false;
  std::string error;
};

/// A set of concurrently running decode jobs with first-finish semantics:
/// next() delivers completions in arrival order (virtual-tick order on the
/// simulator, wall-clock order over HTTP); cancel_all() stops every job that
/// is still running, after which their partial completions remain consumable.
class JobGroup {
 public:
  virtual ~JobGroup() = default;

  virtual Completion next() = 0;
  virtual void cancel_all() = 0;
  virtual int remaining() const = 0;  // completions not yet consumed
};

/// Lock-step batched decoding: every active trace advances exactly one token
/// per step. Only backends with step-level control implement this.
class BatchStepper {
 public:
  virtual ~BatchStepper() = default;

  struct StepResult {
    std::vector<char> eos;  // eos[i] != 0: trace i emitted EOS on this step
  };

  virtual StepResult step() = 0;
  virtual int batch_size() const = 0;

  /// Materialize trace `index` as stopped at the current step count.
  virtual Trace finalize(int index, FinishReason reason) = 0;
};

/// A single decode segment, used by budget forcing to continue from an
/// extended prefix.
struct Segment {
  long token_count = 0;
  std::string text;
  bool hit_eos = false;
};

class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::string name() const = 0;
  virtual bool supports_lockstep() const { return false; }
  virtual bool supports_continuation() const { return false; }

  virtual std::unique_ptr<JobGroup> launch(const PromptSpec& prompt, const DecodeParams& params,
                                           int n_jobs) = 0;

  virtual std::unique_ptr<BatchStepper> launch_batch(const PromptSpec&, const DecodeParams&,
                                                     int /*n_jobs*/) {
    throw UnsupportedBackend("UNSUPPORTED_BACKEND: " + name() + " cannot decode in lock-step");
  }

  /// Decode up to `max_new_tokens` continuing from `prefix` (prompt plus any
  /// previously generated text and injected forcing strings).
  virtual Segment decode_segment(const PromptSpec&, const std::string& /*prefix*/,
                                 const DecodeParams&, long /*max_new_tokens*/,
                                 int /*segment_index*/) {
    throw UnsupportedBackend("UNSUPPORTED_BACKEND: " + name() +
                             " cannot continue from an extended prefix");
  }
};

}  // namespace firstfinish
