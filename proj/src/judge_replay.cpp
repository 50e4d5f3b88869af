#include <algorithm>
#include <fstream>

#include "traceopt/judge.hpp"

namespace traceopt::judge {

namespace {

std::string record_key(const std::string& task_id, Rubric rubric,
                       const std::string& hash) {
  std::string key = task_id;
  key += '|';
  key += to_string(rubric);
  key += '|';
  key += hash;
  return key;
}

}  // namespace

ReplayJudge::ReplayJudge(const std::filesystem::path& fixture_dir_or_file) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(fixture_dir_or_file)) {
    for (const auto& entry :
         std::filesystem::directory_iterator(fixture_dir_or_file)) {
      if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(fixture_dir_or_file);
  }
  for (const auto& file : files) {
    for_each_jsonl(file, [this](std::size_t line, const nlohmann::json& record) {
      for (const char* key : {"task_id", "rubric", "payload_hash", "response"}) {
        if (!record.contains(key)) {
          throw ValidationError("replay record at line " + std::to_string(line) +
                                " is missing '" + key + "'");
        }
      }
      add_record(record.at("task_id").get<std::string>(),
                 rubric_from_string(record.at("rubric").get<std::string>()),
                 record.at("payload_hash").get<std::string>(),
                 record.at("response"));
    });
  }
}

void ReplayJudge::add_record(const std::string& task_id, Rubric rubric,
                             const std::string& payload_hash,
                             nlohmann::json response) {
  records_[record_key(task_id, rubric, payload_hash)] = std::move(response);
}

nlohmann::json ReplayJudge::evaluate(const JudgeRequest& req) {
  std::string key = record_key(req.task_id, req.rubric, payload_hash(req));
  auto it = records_.find(key);
  if (it == records_.end()) {
    throw JudgeUnavailable("replay store has no record for key " + key);
  }
  return it->second;
}

RecordingJudge::RecordingJudge(JudgeBackend& inner, std::filesystem::path out_path)
    : inner_(inner), out_path_(std::move(out_path)) {}

RecordingJudge::~RecordingJudge() {
  if (records_.empty()) return;
  std::ofstream out(out_path_, std::ios::app);
  for (const auto& record : records_) out << record.dump() << '\n';
}

nlohmann::json RecordingJudge::evaluate(const JudgeRequest& req) {
  nlohmann::json response = inner_.evaluate(req);
  records_.push_back({{"task_id", req.task_id},
                      {"rubric", std::string(to_string(req.rubric))},
                      {"payload_hash", payload_hash(req)},
                      {"model_id", req.model_id},
                      {"response", response}});
  return response;
}

}  // namespace traceopt::judge
