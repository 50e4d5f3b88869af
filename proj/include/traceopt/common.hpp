/// @file common.hpp
/// @brief Shared primitives: error hierarchy, task tuple, stable hashing, JSONL IO.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace traceopt {

/// Maps onto CLI exit codes: validation -> 1, external -> 2.
enum class ErrorClass { validation, external };

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& msg)
      : std::runtime_error(msg), cls_(cls) {}

  ErrorClass error_class() const { return cls_; }

 private:
  ErrorClass cls_;
};

/// Input or invariant violations (bad files, bad arguments, contract breaches).
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& msg)
      : Error(ErrorClass::validation, msg) {}
};

/// Failures of services outside the process (remote judges, generators).
class ExternalError : public Error {
 public:
  explicit ExternalError(const std::string& msg)
      : Error(ErrorClass::external, msg) {}
};

/// Which functional part of a reasoning trace a value refers to.
enum class Segment { desc, reason };

std::string_view to_string(Segment s);

/// The multimodal task tuple. Image and depth references are opaque
/// identifiers; no pixel data is ever touched here.
struct TaskInstance {
  std::string task_id;
  std::string image_ref;
  std::string depth_ref;
  std::string question;
  std::vector<std::string> region_prompts;
  std::optional<std::string> ground_truth;
};

TaskInstance task_from_json(const nlohmann::json& j);
nlohmann::json task_to_json(const TaskInstance& t);

/// FNV-1a, 64-bit. Used for fixture keys and replay-store lookups, so it
/// must be identical across platforms and runs; std::hash is not.
std::uint64_t fnv1a64(std::string_view data);
std::string fnv1a64_hex(std::string_view data);

/// Reads one JSON object per line, skipping blank lines. `fn` receives the
/// 1-based line number; parse failures raise ValidationError naming it.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t, const nlohmann::json&)>& fn);

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

void write_jsonl(const std::filesystem::path& path,
                 const std::vector<nlohmann::json>& records);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace traceopt
