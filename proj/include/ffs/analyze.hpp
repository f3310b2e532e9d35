#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ffs/shapiro_wilk.hpp"
#include "ffs/theory.hpp"

namespace firstfinish {

/// One logged trace, as read back from a run's questions.jsonl.
struct LoggedTrace {
  std::string question_id;
  long token_count = 0;
  bool correct = false;
  bool finished = false;
};

inline std::vector<LoggedTrace> load_trace_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("analyze: cannot read " + path);
  std::vector<LoggedTrace> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    for (const auto& t : j.at("traces")) {
      LoggedTrace lt;
      lt.question_id = j.at("question_id").get<std::string>();
      lt.token_count = t.at("token_count").get<long>();
      lt.correct = t.at("correct").get<bool>();
      lt.finished = t.at("finish_reason").get<std::string>() != "CANCELLED";
      out.push_back(std::move(lt));
    }
  }
  return out;
}

struct AnalysisReport {
  // per-question normality of trace lengths
  struct QuestionRow {
    std::string question_id;
    int n_traces = 0;
    double sw_w = 0.0;
    double sw_p = 0.0;
    bool valid = false;  // enough distinct finished traces for the test
  };
  std::vector<QuestionRow> questions;

  // correct vs incorrect length separation
  WelchResult welch{};
  bool welch_valid = false;
  SampleStats correct_stats{};
  SampleStats incorrect_stats{};

  // fitted mixture and the implied correctness-given-length curve
  MixtureParams fitted{};
  bool fit_valid = false;
  std::vector<std::pair<double, double>> curve;  // (length, p_correct)
};

/// Length-distribution statistics over a persisted trace log: Shapiro-Wilk
/// per question, Welch t between correct and incorrect finished traces, and
/// the fitted correctness-given-length curve.
inline AnalysisReport analyze_traces(const std::vector<LoggedTrace>& traces,
                                     int curve_points = 50) {
  AnalysisReport report;

  std::map<std::string, std::vector<double>> by_question;
  std::vector<double> correct_lengths, incorrect_lengths;
  for (const auto& t : traces) {
    if (!t.finished) continue;
    by_question[t.question_id].push_back(static_cast<double>(t.token_count));
    (t.correct ? correct_lengths : incorrect_lengths)
        .push_back(static_cast<double>(t.token_count));
  }

  for (const auto& [qid, lengths] : by_question) {
    AnalysisReport::QuestionRow row;
    row.question_id = qid;
    row.n_traces = static_cast<int>(lengths.size());
    try {
      const auto sw = shapiro_wilk(lengths);
      row.sw_w = sw.w;
      row.sw_p = sw.p_value;
      row.valid = true;
    } catch (const std::exception&) {
      row.valid = false;
    }
    report.questions.push_back(std::move(row));
  }

  report.correct_stats = SampleStats::from_samples(correct_lengths);
  report.incorrect_stats = SampleStats::from_samples(incorrect_lengths);
  if (report.correct_stats.n >= 2 && report.incorrect_stats.n >= 2) {
    try {
      report.welch = welch_t(report.correct_stats, report.incorrect_stats);
      report.welch_valid = true;
    } catch (const std::exception&) {
    }
  }

  if (report.correct_stats.n >= 2 && report.incorrect_stats.n >= 2 &&
      report.correct_stats.variance > 0.0 && report.incorrect_stats.variance > 0.0) {
    report.fitted.alpha = static_cast<double>(report.correct_stats.n) /
                          static_cast<double>(report.correct_stats.n + report.incorrect_stats.n);
    report.fitted.mu1 = report.correct_stats.mean;
    report.fitted.sigma1 = std::sqrt(report.correct_stats.variance);
    report.fitted.mu2 = report.incorrect_stats.mean;
    report.fitted.sigma2 = std::sqrt(report.incorrect_stats.variance);
    report.fit_valid = true;
    double lo = std::min(report.fitted.mu1 - 2.0 * report.fitted.sigma1,
                         report.fitted.mu2 - 2.0 * report.fitted.sigma2);
    double hi = std::max(report.fitted.mu1 + 2.0 * report.fitted.sigma1,
                         report.fitted.mu2 + 2.0 * report.fitted.sigma2);
    lo = std::max(lo, 1.0);
    for (int i = 0; i < curve_points; ++i) {
      const double x = lo + (hi - lo) * i / (curve_points - 1);
      report.curve.emplace_back(x, p_correct_given_length(x, report.fitted));
    }
  }
  return report;
}

inline std::string analysis_questions_csv(const AnalysisReport& report) {
  std::ostringstream out;
  out << "question_id,n_traces,sw_w,sw_p\n";
  for (const auto& q : report.questions) {
    out << q.question_id << ',' << q.n_traces << ',';
    if (q.valid) {
      out << q.sw_w << ',' << q.sw_p;
    } else {
      out << ",";
    }
    out << '\n';
  }
  return out.str();
}

inline std::string analysis_summary_csv(const AnalysisReport& report) {
  std::ostringstream out;
  out << "welch_t,welch_df,alpha,mu1,sigma1,mu2,sigma2\n";
  if (report.welch_valid) out << report.welch.t << ',' << report.welch.df;
  else out << ',';
  out << ',';
  if (report.fit_valid) {
    out << report.fitted.alpha << ',' << report.fitted.mu1 << ',' << report.fitted.sigma1 << ','
        << report.fitted.mu2 << ',' << report.fitted.sigma2;
  } else {
    out << ",,,,";
  }
  out << '\n';
  return out.str();
}

inline std::string analysis_curve_csv(const AnalysisReport& report) {
  std::ostringstream out;
  out << "length_tokens,p_correct\n";
  for (const auto& [x, p] : report.curve) out << x << ',' << p << '\n';
  return out.str();
}

}  // namespace firstfinish
