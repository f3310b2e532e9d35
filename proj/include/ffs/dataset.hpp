#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ffs/answer.hpp"
#include "ffs/types.hpp"

namespace firstfinish {

/// One benchmark question.
struct DatasetRecord {
  std::string id;
  std::string problem;
  std::string answer;  // normalized truth: "000".."999" or "A".."D"
  TaskKind task_type = TaskKind::AimeNumeric;
  std::vector<std::string> options;  // exactly 4, multiple-choice only

  void validate() const {
    if (id.empty()) throw std::invalid_argument("dataset: record with empty id");
    if (task_type == TaskKind::McOption) {
      if (options.size() != 4)
        throw std::invalid_argument("dataset: MC record " + id + " needs exactly 4 options");
      if (answer.size() != 1 || answer[0] < 'A' || answer[0] > 'D')
        throw std::invalid_argument("dataset: MC record " + id + " answer must be A-D");
    } else {
      if (answer.size() != 3 ||
          answer.find_first_not_of("0123456789") != std::string::npos)
        throw std::invalid_argument("dataset: AIME record " + id + " answer must be 3 digits");
    }
  }
};

inline DatasetRecord record_from_json(const nlohmann::json& j) {
  DatasetRecord r;
  r.id = j.at("id").get<std::string>();
  r.problem = j.at("problem").get<std::string>();
  r.answer = j.at("answer").get<std::string>();
  const std::string task = j.at("task_type").get<std::string>();
  if (task == "AIME_NUMERIC") {
    r.task_type = TaskKind::AimeNumeric;
  } else if (task == "MC_OPTION") {
    r.task_type = TaskKind::McOption;
  } else {
    throw std::invalid_argument("dataset: unknown task_type " + task);
  }
  if (j.contains("options")) r.options = j["options"].get<std::vector<std::string>>();
  r.validate();
  return r;
}

/// JSONL, one record per line, UTF-8. Blank lines are skipped.
inline std::vector<DatasetRecord> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("dataset: cannot read " + path);
  std::vector<DatasetRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error("dataset: " + path + ":" + std::to_string(lineno) + ": " +
                               e.what());
    }
  }
  return records;
}

/// Zero-shot prompt rendering.
inline std::string render_prompt(const DatasetRecord& record) {
  if (record.task_type == TaskKind::AimeNumeric) {
    return record.problem +
           "\n\nPlease reason step by step, and put your final answer within \\boxed{}.";
  }
  if (record.options.size() != 4)
    throw std::invalid_argument("render_prompt: MC record " + record.id +
                                " needs exactly 4 options");
  std::ostringstream out;
  out << "What is the correct answer to this question:\n"
      << record.problem << "\n\nChoices:\n";
  const char* labels = "ABCD";
  for (int i = 0; i < 4; ++i) out << "(" << labels[i] << ") " << record.options[i] << "\n";
  out << "\nAnswer: (A), (B), (C), or (D). Choose the correct option within \\boxed{}.";
  return out.str();
}

inline PromptSpec to_prompt_spec(const DatasetRecord& record) {
  return PromptSpec{record.id, render_prompt(record), record.task_type};
}

}  // namespace firstfinish
