#include <chrono>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "traceopt/judge.hpp"

namespace traceopt::judge {

namespace {

struct ParsedEndpoint {
  std::string host_port;  // "host:port" as httplib expects
  std::string path;
};

ParsedEndpoint parse_endpoint(const std::string& endpoint) {
  constexpr std::string_view http = "http://";
  constexpr std::string_view https = "https://";
  if (endpoint.rfind(https.data(), 0) == 0) {
    throw ValidationError("https judge endpoints are not supported in this build; "
                          "use http://host:port/path");
  }
  if (endpoint.rfind(http.data(), 0) != 0) {
    throw ValidationError("judge endpoint must look like http://host:port/path, got '" +
                          endpoint + "'");
  }
  std::string rest = endpoint.substr(http.size());
  std::size_t slash = rest.find('/');
  ParsedEndpoint out;
  out.host_port = slash == std::string::npos ? rest : rest.substr(0, slash);
  out.path = slash == std::string::npos ? "/" : rest.substr(slash);
  if (out.host_port.empty()) {
    throw ValidationError("judge endpoint is missing a host: '" + endpoint + "'");
  }
  return out;
}

std::string env_or(const char* name, const std::string& fallback) {
  const char* value = std::getenv(name);
  return value != nullptr && *value != '\0' ? std::string(value) : fallback;
}

}  // namespace

RemoteJudge::RemoteJudge(RemoteJudgeConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty()) config_.endpoint = env_or("JUDGE_ENDPOINT", "");
  if (config_.api_key.empty()) config_.api_key = env_or("JUDGE_API_KEY", "");
  if (config_.endpoint.empty()) {
    throw ValidationError("remote judge needs an endpoint; pass one or set "
                          "JUDGE_ENDPOINT");
  }
  if (config_.max_retries < 1) {
    throw ValidationError("remote judge max_retries must be at least 1");
  }
}

nlohmann::json RemoteJudge::evaluate(const JudgeRequest& req) {
  ParsedEndpoint ep = parse_endpoint(config_.endpoint);

  nlohmann::json body = {
      {"prompt", build_judge_prompt(req.question, req.ground_truth)},
      {"question", req.question},
      {"ground_truth", req.ground_truth},
      {"image_ref", req.image_ref},
      {"depth_ref", req.depth_ref},
      {"rubric", std::string(to_string(req.rubric))},
      {"payload_text", req.payload_text},
      {"model", req.model_id},
  };
  std::string payload = body.dump();

  httplib::Headers headers;
  if (!config_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + config_.api_key);
  }

  // max_retries counts attempts, not re-tries after the first failure.
  bool timed_out = false;
  std::string last_error;
  double backoff = config_.backoff_initial_seconds;
  for (int attempt = 1; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
      backoff *= 2.0;
    }
    httplib::Client client(ep.host_port);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_read_timeout(config_.timeout_seconds, 0);

    auto res = client.Post(ep.path, headers, payload, "application/json");
    if (!res) {
      auto err = res.error();
      timed_out = err == httplib::Error::ConnectionTimeout ||
                  err == httplib::Error::Read || err == httplib::Error::Write;
      last_error = httplib::to_string(err);
      continue;
    }
    if (res->status >= 500) {
      timed_out = false;
      last_error = "server returned status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw JudgeUnavailable("judge endpoint rejected the request with status " +
                             std::to_string(res->status) + ": " + res->body);
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
      throw JudgeMalformedOutput(std::string("judge response is not JSON: ") +
                                     e.what(),
                                 nlohmann::json{{"body", res->body}});
    }
  }
  std::string summary = "judge endpoint " + config_.endpoint + " failed after " +
                        std::to_string(config_.max_retries) +
                        " attempts: " + last_error;
  if (timed_out) throw JudgeTimeout(summary);
  throw JudgeUnavailable(summary);
}

}  // namespace traceopt::judge
