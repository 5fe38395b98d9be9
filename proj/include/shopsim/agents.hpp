#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "shopsim/catalog.hpp"

namespace shopsim {

enum class MessageRole { system, user, assistant };
std::string_view message_role_name(MessageRole r);

struct ChatMessage {
  MessageRole role = MessageRole::user;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct CompletionParams {
  std::optional<double> temperature;  // provider default when absent
  std::optional<int> max_output_tokens;

  bool operator==(const CompletionParams&) const = default;
};

// Where a request sits inside a run. Scripted replay keys on it; live
// backends ignore it.
struct RequestTag {
  std::string run_id;
  std::string stage;
  std::string turn;
};

struct CompletionRequest {
  std::vector<ChatMessage> messages;
  CompletionParams params;
  RequestTag tag;
};

struct CompletionResult {
  std::string text;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  std::string backend_id;
  int attempt_count = 1;

  bool operator==(const CompletionResult&) const = default;
};

void to_json(nlohmann::json& j, const ChatMessage& m);
void from_json(const nlohmann::json& j, ChatMessage& m);
void to_json(nlohmann::json& j, const CompletionParams& p);
void from_json(const nlohmann::json& j, CompletionParams& p);
void to_json(nlohmann::json& j, const CompletionResult& r);
void from_json(const nlohmann::json& j, CompletionResult& r);

// Chat-completion provider. Implementations must be callable from many
// threads at once.
class AgentBackend {
 public:
  virtual ~AgentBackend() = default;
  virtual CompletionResult complete(const CompletionRequest& request) = 0;
  virtual std::string id() const = 0;
  virtual std::string model() const { return id(); }
};

using BackendPtr = std::shared_ptr<AgentBackend>;

// ---- retry -------------------------------------------------------------

struct RetryPolicy {
  int max_attempts = 5;
  double base_delay_s = 1.0;
  double factor = 2.0;
  double jitter = 0.2;  // +/- fraction
  std::chrono::milliseconds timeout{120000};
};

void to_json(nlohmann::json& j, const RetryPolicy& p);
void from_json(const nlohmann::json& j, RetryPolicy& p);

// Delay before attempt k+2 (k from 0), given a uniform draw in [0, 1).
// Non-decreasing whenever jitter <= (factor - 1) / (factor + 1).
double backoff_delay(const RetryPolicy& policy, int k, double unit_random);
bool is_retryable_status(int status);

using Sleeper = std::function<void(std::chrono::duration<double>)>;
Sleeper real_sleeper();

struct HttpReply {
  int status = 0;
  std::string body;
};

// One HTTP POST of a JSON body. Throws TransportError when no response.
using HttpPoster = std::function<HttpReply(const std::string& url, const std::string& body,
                                           const std::vector<std::pair<std::string, std::string>>& headers,
                                           std::chrono::milliseconds timeout)>;
HttpPoster default_http_poster();

struct RetriedReply {
  std::string body;
  int attempts = 0;
};

// POST with retries on timeouts, 408, 429 and 5xx. Non-retryable statuses
// raise RequestError carrying a body excerpt; exhaustion raises
// TransportError. `delays` receives each sleep when non-null.
RetriedReply post_with_retry(const HttpPoster& poster, const std::string& url, const std::string& body,
                             const std::vector<std::pair<std::string, std::string>>& headers,
                             const RetryPolicy& policy, const Sleeper& sleeper, std::uint64_t jitter_seed,
                             std::vector<double>* delays = nullptr);

// ---- live HTTP -----------------------------------------------------------

struct HttpBackendConfig {
  std::string id;
  std::string endpoint;  // base URL, e.g. https://host/v1
  std::string model;
  std::string api_key_env;  // empty: no Authorization header
  RetryPolicy retry;
  CompletionParams defaults;
};

// OpenAI-compatible `<endpoint>/chat/completions`.
class HttpBackend final : public AgentBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config, HttpPoster poster = default_http_poster(),
                       Sleeper sleeper = real_sleeper());

  CompletionResult complete(const CompletionRequest& request) override;
  std::string id() const override { return config_.id; }
  std::string model() const override { return config_.model; }

  // Request body for the wire; exposed for tests.
  nlohmann::json request_body(const CompletionRequest& request) const;
  const std::vector<double>& last_delays() const { return last_delays_; }

 private:
  HttpBackendConfig config_;
  HttpPoster poster_;
  Sleeper sleeper_;
  std::atomic<std::uint64_t> counter_{0};
  std::vector<double> last_delays_;
  std::mutex mu_;
};

// ---- scripted replay -------------------------------------------------------

struct ScriptEntry {
  std::string run_id;  // "*" matches any run
  std::string stage;
  std::string turn;
  std::string text;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
};

// Queue keyed by (run_id, stage, turn). Each entry is consumed once.
class ScriptedBackend final : public AgentBackend {
 public:
  explicit ScriptedBackend(std::string id, std::vector<ScriptEntry> entries = {});
  // {"backend_id": ..., "entries": [{run_id, stage, turn, text, input_tokens, output_tokens}]}
  static std::shared_ptr<ScriptedBackend> from_file(const std::filesystem::path& path,
                                                    std::string id_override = {});

  void push(ScriptEntry entry);
  CompletionResult complete(const CompletionRequest& request) override;
  std::string id() const override { return id_; }
  std::size_t remaining() const;

 private:
  std::string id_;
  mutable std::mutex mu_;
  std::multimap<std::string, ScriptEntry> entries_;  // key -> entries in push order
};

// ---- content-addressed cache -------------------------------------------------

// Stable hash of (backend_id, model, messages, params). Object keys are
// serialized sorted, so field order never matters.
std::string cache_key(std::string_view backend_id, std::string_view model,
                      const std::vector<ChatMessage>& messages, const CompletionParams& params);
std::string sha256_hex(std::string_view data);

class CachedBackend final : public AgentBackend {
 public:
  CachedBackend(BackendPtr inner, std::filesystem::path dir);

  CompletionResult complete(const CompletionRequest& request) override;
  std::string id() const override { return inner_->id(); }
  std::string model() const override { return inner_->model(); }

  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }
  std::size_t corrupt_entries() const { return corrupt_; }
  void clear();

 private:
  BackendPtr inner_;
  std::filesystem::path dir_;
  std::mutex write_mu_;
  std::atomic<std::size_t> hits_{0}, misses_{0}, corrupt_{0};
};

// ---- offline synthetic agent ---------------------------------------------------

// Deterministic stand-in for a model: answers every pipeline stage with
// plausible text or JSON derived from a hash of the prompt. Purchase odds
// fall with price and rise for price-indifferent personas.
class SyntheticBackend final : public AgentBackend {
 public:
  explicit SyntheticBackend(std::string id, std::uint64_t seed = 0);
  CompletionResult complete(const CompletionRequest& request) override;
  std::string id() const override { return id_; }

 private:
  std::string id_;
  std::uint64_t seed_;
};

// Category fallback that asks a backend to name one of the four categories.
CategoryFallback make_backend_category_fallback(BackendPtr backend);

}  // namespace shopsim
