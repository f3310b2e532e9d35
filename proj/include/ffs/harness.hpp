#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ffs/backend.hpp"
#include "ffs/dataset.hpp"
#include "ffs/rng.hpp"
#include "ffs/strategy.hpp"

namespace firstfinish {

/// One aggregated metrics row per (dataset, backend, strategy).
struct MetricsRow {
  std::string dataset;
  std::string backend;
  Strategy strategy = Strategy::Sd;
  int n_samples = 0;
  int question_count = 0;
  double accuracy = 0.0;
  double mean_sequential_tokens = 0.0;
  double mean_total_tokens = 0.0;
};

struct SweepConfig {
  std::string dataset_name;
  DecodeParams params;
  std::uint64_t seed = 0;
  int repeats = 1;
  int parallel = 1;
  bool persist_traces = false;  // per-trace text files under out_dir/traces/
  std::string out_dir;          // empty: nothing persisted
};

namespace detail {

inline std::string csv_double(double v) {
  std::ostringstream out;
  out << std::setprecision(10) << v;
  return out.str();
}

// Bounded-parallelism ordered map: results land in input order regardless of
// scheduling, keeping aggregation deterministic.
template <typename Fn>
void parallel_for(std::size_t count, int parallel, Fn&& fn) {
  if (parallel <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  const int n_workers = std::min<std::size_t>(parallel, count);
  std::exception_ptr first_error;
  std::mutex error_mu;
  for (int w = 0; w < n_workers; ++w) {
    workers.emplace_back([&] {
      std::size_t i;
      while ((i = next.fetch_add(1)) < count) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

/// Per-question result of one strategy run, as persisted to the trace log.
struct QuestionResult {
  std::string question_id;
  Strategy strategy = Strategy::Sd;
  int repeat = 0;
  std::string truth;
  bool correct = false;
  bool errored = false;
  std::string error;
  StrategyOutcome outcome;
};

inline nlohmann::json question_log_json(const QuestionResult& r) {
  nlohmann::json traces = nlohmann::json::array();
  for (const auto& t : r.outcome.traces) {
    traces.push_back({{"trace_id", t.trace_id},
                      {"token_count", t.token_count},
                      {"finish_reason", to_string(t.finish_reason)},
                      {"parsed_answer", t.parsed_answer},
                      {"completion_order",
                       t.completion_order ? nlohmann::json(*t.completion_order) : nlohmann::json()},
                      {"correct", t.parsed_answer != kNoAnswer && t.parsed_answer == r.truth}});
  }
  return {{"question_id", r.question_id}, {"strategy", to_string(r.strategy)},
          {"repeat", r.repeat},           {"correct", r.correct},
          {"errored", r.errored},         {"error", r.error},
          {"answer", r.outcome.answer},   {"sequential_tokens", r.outcome.sequential_tokens},
          {"total_tokens", r.outcome.total_tokens},
          {"traces", traces}};
}

class SweepError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs strategy x question sweeps, aggregates metrics, and persists a
/// metrics CSV, a run manifest, a per-question JSONL log, and (optionally)
/// per-trace text files. Individual question failures are scored incorrect
/// and the sweep continues; more than 50% failures aborts it.
class EvalHarness {
 public:
  EvalHarness(Backend& backend, const std::vector<DatasetRecord>& dataset, SweepConfig config)
      : backend_(backend), dataset_(dataset), config_(std::move(config)) {}

  std::vector<MetricsRow> run_sweep(const std::vector<Strategy>& strategies) {
    std::vector<MetricsRow> rows;
    skipped_.clear();
    results_.clear();
    for (Strategy strategy : strategies) {
      if (!backend_supports(strategy)) {
        skipped_.push_back({to_string(strategy),
                            "backend '" + backend_.name() + "' lacks the required capability"});
        continue;
      }
      rows.push_back(run_one_strategy(strategy));
    }
    persist(rows);
    return rows;
  }

  /// One sweep per n; rows suitable for plotting accuracy vs token budget.
  std::vector<MetricsRow> scaling_curve(Strategy strategy, const std::vector<int>& n_values) {
    if (n_values.empty()) throw std::invalid_argument("scaling_curve: n_values is empty");
    std::vector<MetricsRow> rows;
    for (int n : n_values) {
      if (n <= 0 || (!rows.empty() && n <= rows.back().n_samples))
        throw std::invalid_argument("scaling_curve: n_values must be positive ascending");
      EvalHarness sub(backend_, dataset_, config_);
      sub.config_.params.n_samples = n;
      auto sub_rows = sub.run_sweep({strategy});
      if (!sub_rows.empty()) rows.push_back(sub_rows.front());
    }
    return rows;
  }

  const std::vector<QuestionResult>& results() const { return results_; }

  struct Skipped {
    std::string strategy;
    std::string reason;
  };
  const std::vector<Skipped>& skipped() const { return skipped_; }

  static std::string metrics_csv_header() {
    return "dataset,backend,strategy,n,questions,accuracy,mean_seq_tokens,mean_total_tokens";
  }

  static std::string metrics_csv_row(const MetricsRow& row) {
    std::ostringstream out;
    out << row.dataset << ',' << row.backend << ',' << to_string(row.strategy) << ','
        << row.n_samples << ',' << row.question_count << ',' << detail::csv_double(row.accuracy)
        << ',' << detail::csv_double(row.mean_sequential_tokens) << ','
        << detail::csv_double(row.mean_total_tokens);
    return out.str();
  }

 private:
  bool backend_supports(Strategy s) const {
    if (s == Strategy::FfsSync) return backend_.supports_lockstep();
    if (s == Strategy::Bf) return backend_.supports_continuation();
    return true;
  }

  MetricsRow run_one_strategy(Strategy strategy) {
    const std::size_t runs = dataset_.size() * static_cast<std::size_t>(config_.repeats);
    std::vector<QuestionResult> results(runs);
    std::atomic<long> failures{0};
    detail::parallel_for(runs, config_.parallel, [&](std::size_t i) {
      const std::size_t qi = i % dataset_.size();
      const int repeat = static_cast<int>(i / dataset_.size());
      const DatasetRecord& record = dataset_[qi];
      QuestionResult& r = results[i];
      r.question_id = record.id;
      r.strategy = strategy;
      r.repeat = repeat;
      r.truth = record.answer;
      DecodeParams params = config_.params;
      params.seed = mix64(config_.seed ^ mix64(static_cast<std::uint64_t>(repeat)));
      try {
        r.outcome = run_strategy(strategy, backend_, to_prompt_spec(record), params);
        r.correct = score({record.task_type, r.outcome.answer}, record.answer);
      } catch (const std::exception& e) {
        r.errored = true;
        r.error = e.what();
        r.correct = false;
        if (failures.fetch_add(1) + 1 > static_cast<long>(runs) / 2) {
          throw SweepError("sweep aborted: more than 50% of questions failed (" +
                           std::string(e.what()) + ")");
        }
      }
    });

    MetricsRow row;
    row.dataset = config_.dataset_name;
    row.backend = backend_.name();
    row.strategy = strategy;
    row.n_samples = config_.params.n_samples;
    row.question_count = static_cast<int>(dataset_.size());
    long correct = 0;
    double seq_sum = 0.0, total_sum = 0.0;
    for (const auto& r : results) {
      correct += r.correct ? 1 : 0;
      seq_sum += static_cast<double>(r.outcome.sequential_tokens);
      total_sum += static_cast<double>(r.outcome.total_tokens);
    }
    row.accuracy = runs ? static_cast<double>(correct) / static_cast<double>(runs) : 0.0;
    row.mean_sequential_tokens = runs ? seq_sum / static_cast<double>(runs) : 0.0;
    row.mean_total_tokens = runs ? total_sum / static_cast<double>(runs) : 0.0;
    results_.insert(results_.end(), results.begin(), results.end());
    return row;
  }

  void persist(const std::vector<MetricsRow>& rows) const {
    if (config_.out_dir.empty()) return;
    namespace fs = std::filesystem;
    fs::create_directories(config_.out_dir);

    {
      std::ofstream csv(fs::path(config_.out_dir) / "metrics.csv", std::ios::trunc);
      csv << metrics_csv_header() << '\n';
      for (const auto& row : rows) csv << metrics_csv_row(row) << '\n';
    }
    {
      std::ofstream log(fs::path(config_.out_dir) / "questions.jsonl", std::ios::trunc);
      for (const auto& r : results_) log << question_log_json(r).dump() << '\n';
    }
    {
      nlohmann::json manifest{
          {"dataset", config_.dataset_name},
          {"backend", backend_.name()},
          {"seed", config_.seed},
          {"repeats", config_.repeats},
          {"parallel", config_.parallel},
          {"params",
           {{"temperature", config_.params.temperature},
            {"top_p", config_.params.top_p},
            {"max_tokens", config_.params.max_tokens},
            {"n_samples", config_.params.n_samples},
            {"bf_answer_reserve", config_.params.bf_answer_reserve},
            {"bf_max_forces", config_.params.bf_max_forces}}},
          {"skipped", nlohmann::json::array()}};
      for (const auto& s : skipped_) {
        manifest["skipped"].push_back({{"strategy", s.strategy}, {"reason", s.reason}});
      }
      std::ofstream out(fs::path(config_.out_dir) / "manifest.json", std::ios::trunc);
      out << manifest.dump(2) << '\n';
    }
    if (config_.persist_traces) {
      const fs::path trace_dir = fs::path(config_.out_dir) / "traces";
      fs::create_directories(trace_dir);
      for (const auto& r : results_) {
        for (const auto& t : r.outcome.traces) {
          std::ostringstream name;
          name << r.question_id << '_' << to_string(r.strategy) << '_' << t.trace_id << ".txt";
          std::ofstream out(trace_dir / name.str(), std::ios::trunc);
          out << t.text;
        }
      }
    }
  }

  Backend& backend_;
  const std::vector<DatasetRecord>& dataset_;
  SweepConfig config_;
  std::vector<QuestionResult> results_;
  std::vector<Skipped> skipped_;
};

}  // namespace firstfinish
