#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ffs/answer.hpp"

namespace firstfinish {

enum class FinishReason { Eos, LengthCap, Cancelled };

enum class Strategy { Sd, FfsSync, FfsAsync, Lfs, Mv, Bf };

inline const char* to_string(FinishReason r) {
  switch (r) {
    case FinishReason::Eos: return "EOS";
    case FinishReason::LengthCap: return "LENGTH_CAP";
    case FinishReason::Cancelled: return "CANCELLED";
  }
  return "?";
}

inline const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::Sd: return "sd";
    case Strategy::FfsSync: return "ffs-sync";
    case Strategy::FfsAsync: return "ffs";
    case Strategy::Lfs: return "lfs";
    case Strategy::Mv: return "mv";
    case Strategy::Bf: return "bf";
  }
  return "?";
}

/// One complete or truncated decoding.
struct Trace {
  int trace_id = 0;
  std::string prompt_id;
  long token_count = 0;
  std::string text;
  FinishReason finish_reason = FinishReason::Eos;
  std::string parsed_answer{kNoAnswer};  // kNoAnswer while unparsed or cancelled
  std::optional<int> completion_order;   // 1..k among finished traces; absent for cancelled
};

/// Sampling configuration shared by all strategies.
struct DecodeParams {
  double temperature = 0.6;
  double top_p = 0.95;
  long max_tokens = 32768;
  int n_samples = 4;
  long bf_answer_reserve = 3072;  // tokens held back for the forced answer (BF)
  int bf_max_forces = 4;          // bound on "Wait" continuations (BF)
  std::string bf_delimiter = "\n\nFinal Answer:";
  std::optional<std::uint64_t> seed;
};

/// What a prompt is about: identity, rendered text, and how to parse answers.
struct PromptSpec {
  std::string id;
  std::string text;
  TaskKind task = TaskKind::AimeNumeric;
};

struct StrategyOutcome {
  Strategy strategy = Strategy::Sd;
  Trace chosen;
  std::vector<Trace> traces;  // every launched job, including cancelled partials
  long sequential_tokens = 0;
  long total_tokens = 0;
  std::string answer{kNoAnswer};
};

}  // namespace firstfinish
