#include "traceopt/common.hpp"

#include <fstream>
#include <sstream>


namespace traceopt {

std::string_view to_string(Segment s) {
  return s == Segment::desc ? "desc" : "reason";
}

TaskInstance task_from_json(const nlohmann::json& j) {
  TaskInstance t;
  t.task_id = j.at("task_id").get<std::string>();
  t.image_ref = j.value("image_ref", "");
  t.depth_ref = j.value("depth_ref", "");
  t.question = j.value("question", "");
  if (j.contains("region_prompts")) {
    t.region_prompts = j.at("region_prompts").get<std::vector<std::string>>();
  }
  if (j.contains("ground_truth") && !j.at("ground_truth").is_null()) {
    t.ground_truth = j.at("ground_truth").get<std::string>();
  }
  return t;
}

nlohmann::json task_to_json(const TaskInstance& t) {
  nlohmann::json j{{"task_id", t.task_id},
                   {"image_ref", t.image_ref},
                   {"depth_ref", t.depth_ref},
                   {"question", t.question},
                   {"region_prompts", t.region_prompts}};
  if (t.ground_truth) j["ground_truth"] = *t.ground_truth;
  return j;
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string fnv1a64_hex(std::string_view data) {
  static const char* digits = "0123456789abcdef";
  std::uint64_t h = fnv1a64(data);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t, const nlohmann::json&)>& fn) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                            ": invalid JSON");
    }
    fn(lineno, j);
  }
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
  std::vector<nlohmann::json> out;
  for_each_jsonl(path, [&](std::size_t, const nlohmann::json& j) { out.push_back(j); });
  return out;
}

void write_jsonl(const std::filesystem::path& path,
                 const std::vector<nlohmann::json>& records) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open file for writing: " + path.string());
  for (const auto& j : records) out << j.dump() << '\n';
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open file for writing: " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

}  // namespace traceopt
