#include "shopsim/agents.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "shopsim/error.hpp"
#include "shopsim/seed.hpp"

namespace shopsim {

using nlohmann::json;

std::string_view message_role_name(MessageRole r) {
  switch (r) {
    case MessageRole::system: return "system";
    case MessageRole::user: return "user";
    case MessageRole::assistant: return "assistant";
  }
  return "user";
}

void to_json(json& j, const ChatMessage& m) {
  j = json{{"role", message_role_name(m.role)}, {"content", m.content}};
}

void from_json(const json& j, ChatMessage& m) {
  const auto role = j.at("role").get<std::string>();
  if (role == "system") {
    m.role = MessageRole::system;
  } else if (role == "user") {
    m.role = MessageRole::user;
  } else if (role == "assistant") {
    m.role = MessageRole::assistant;
  } else {
    throw ConfigError("unknown message role: " + role);
  }
  m.content = j.at("content").get<std::string>();
}

void to_json(json& j, const CompletionParams& p) {
  j = json::object();
  if (p.temperature) j["temperature"] = *p.temperature;
  if (p.max_output_tokens) j["max_output_tokens"] = *p.max_output_tokens;
}

void from_json(const json& j, CompletionParams& p) {
  p = {};
  if (j.contains("temperature") && !j["temperature"].is_null()) p.temperature = j["temperature"].get<double>();
  if (j.contains("max_output_tokens") && !j["max_output_tokens"].is_null()) {
    p.max_output_tokens = j["max_output_tokens"].get<int>();
  }
}

void to_json(json& j, const CompletionResult& r) {
  j = json{{"text", r.text},
           {"input_tokens", r.input_tokens},
           {"output_tokens", r.output_tokens},
           {"backend_id", r.backend_id},
           {"attempt_count", r.attempt_count}};
}

void from_json(const json& j, CompletionResult& r) {
  r.text = j.at("text").get<std::string>();
  r.input_tokens = j.at("input_tokens").get<std::int64_t>();
  r.output_tokens = j.at("output_tokens").get<std::int64_t>();
  r.backend_id = j.at("backend_id").get<std::string>();
  r.attempt_count = j.at("attempt_count").get<int>();
}

void to_json(json& j, const RetryPolicy& p) {
  j = json{{"max_attempts", p.max_attempts},
           {"base_delay_s", p.base_delay_s},
           {"factor", p.factor},
           {"jitter", p.jitter},
           {"timeout_ms", p.timeout.count()}};
}

void from_json(const json& j, RetryPolicy& p) {
  p = {};
  p.max_attempts = j.value("max_attempts", p.max_attempts);
  p.base_delay_s = j.value("base_delay_s", p.base_delay_s);
  p.factor = j.value("factor", p.factor);
  p.jitter = j.value("jitter", p.jitter);
  p.timeout = std::chrono::milliseconds(j.value("timeout_ms", static_cast<std::int64_t>(p.timeout.count())));
  if (p.max_attempts < 1) throw ConfigError("retry.max_attempts must be >= 1");
  if (p.base_delay_s < 0 || p.factor < 1 || p.jitter < 0 || p.jitter >= 1) {
    throw ConfigError("retry policy values out of range");
  }
}

// ---- retry -------------------------------------------------------------

double backoff_delay(const RetryPolicy& policy, int k, double unit_random) {
  const double nominal = policy.base_delay_s * std::pow(policy.factor, k);
  return nominal * (1.0 + policy.jitter * (2.0 * unit_random - 1.0));
}

bool is_retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

Sleeper real_sleeper() {
  return [](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); };
}

namespace {

std::string excerpt(std::string_view body, std::size_t n = 300) {
  if (body.size() <= n) return std::string(body);
  return std::string(body.substr(0, n)) + "...";
}

}  // namespace

RetriedReply post_with_retry(const HttpPoster& poster, const std::string& url, const std::string& body,
                             const std::vector<std::pair<std::string, std::string>>& headers,
                             const RetryPolicy& policy, const Sleeper& sleeper, std::uint64_t jitter_seed,
                             std::vector<double>* delays) {
  std::mt19937_64 rng(jitter_seed);
  std::string last_error;
  for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
    try {
      HttpReply reply = poster(url, body, headers, policy.timeout);
      if (reply.status >= 200 && reply.status < 300) return {std::move(reply.body), attempt};
      if (!is_retryable_status(reply.status)) {
        throw RequestError(reply.status, "HTTP " + std::to_string(reply.status) + " from " + url +
                                             ": " + excerpt(reply.body));
      }
      last_error = "HTTP " + std::to_string(reply.status) + ": " + excerpt(reply.body);
    } catch (const TransportError& e) {
      last_error = e.what();
    }
    if (attempt < policy.max_attempts) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      const double d = backoff_delay(policy, attempt - 1, u);
      if (delays) delays->push_back(d);
      sleeper(std::chrono::duration<double>(d));
    }
  }
  throw TransportError("giving up on " + url + " after " + std::to_string(policy.max_attempts) +
                       " attempts: " + last_error);
}

// ---- live HTTP -----------------------------------------------------------

HttpBackend::HttpBackend(HttpBackendConfig config, HttpPoster poster, Sleeper sleeper)
    : config_(std::move(config)), poster_(std::move(poster)), sleeper_(std::move(sleeper)) {
  if (config_.endpoint.empty()) throw ConfigError("backend " + config_.id + ": endpoint is empty");
  if (config_.model.empty()) throw ConfigError("backend " + config_.id + ": model is empty");
  while (!config_.endpoint.empty() && config_.endpoint.back() == '/') config_.endpoint.pop_back();
}

json HttpBackend::request_body(const CompletionRequest& request) const {
  json body{{"model", config_.model}, {"messages", request.messages}};
  const auto temperature = request.params.temperature ? request.params.temperature : config_.defaults.temperature;
  const auto max_tokens =
      request.params.max_output_tokens ? request.params.max_output_tokens : config_.defaults.max_output_tokens;
  if (temperature) body["temperature"] = *temperature;
  if (max_tokens) body["max_tokens"] = *max_tokens;
  return body;
}

CompletionResult HttpBackend::complete(const CompletionRequest& request) {
  std::vector<std::pair<std::string, std::string>> headers;
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw ConfigError("backend " + config_.id + ": environment variable " + config_.api_key_env +
                        " is not set");
    }
    headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }
  const std::string url = config_.endpoint + "/chat/completions";
  std::vector<double> delays;
  const auto seed = derive_seed(counter_++, config_.id);
  auto reply = post_with_retry(poster_, url, request_body(request).dump(), headers, config_.retry, sleeper_,
                               seed, &delays);
  {
    std::lock_guard lock(mu_);
    last_delays_ = delays;
  }

  json doc;
  try {
    doc = json::parse(reply.body);
  } catch (const json::exception&) {
    throw TransportError("backend " + config_.id + ": response is not JSON: " + excerpt(reply.body));
  }
  CompletionResult out;
  out.backend_id = config_.id;
  out.attempt_count = reply.attempts;
  try {
    const auto& content = doc.at("choices").at(0).at("message").at("content");
    out.text = content.is_null() ? std::string() : content.get<std::string>();
  } catch (const json::exception&) {
    throw TransportError("backend " + config_.id + ": response has no choices[0].message.content: " +
                         excerpt(reply.body));
  }
  if (doc.contains("usage") && doc["usage"].is_object()) {
    const auto& u = doc["usage"];
    out.input_tokens = u.value("prompt_tokens", u.value("input_tokens", std::int64_t{0}));
    out.output_tokens = u.value("completion_tokens", u.value("output_tokens", std::int64_t{0}));
  }
  return out;
}

// ---- scripted replay -------------------------------------------------------

namespace {

std::string script_key(std::string_view run_id, std::string_view stage, std::string_view turn) {
  std::string k;
  k.append(run_id).append("\x1f").append(stage).append("\x1f").append(turn);
  return k;
}

}  // namespace

ScriptedBackend::ScriptedBackend(std::string id, std::vector<ScriptEntry> entries) : id_(std::move(id)) {
  for (auto& e : entries) push(std::move(e));
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::filesystem::path& path,
                                                            std::string id_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open script fixture " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("script fixture " + path.string() + " is not valid JSON: " + e.what());
  }
  std::string id = id_override.empty() ? doc.value("backend_id", std::string("scripted")) : id_override;
  auto backend = std::make_shared<ScriptedBackend>(id);
  for (const auto& e : doc.at("entries")) {
    backend->push(ScriptEntry{e.value("run_id", std::string("*")), e.at("stage").get<std::string>(),
                              e.at("turn").get<std::string>(), e.at("text").get<std::string>(),
                              e.value("input_tokens", std::int64_t{0}), e.value("output_tokens", std::int64_t{0})});
  }
  return backend;
}

void ScriptedBackend::push(ScriptEntry entry) {
  std::lock_guard lock(mu_);
  auto key = script_key(entry.run_id, entry.stage, entry.turn);
  entries_.emplace(std::move(key), std::move(entry));
}

CompletionResult ScriptedBackend::complete(const CompletionRequest& request) {
  const auto& tag = request.tag;
  std::lock_guard lock(mu_);
  auto it = entries_.find(script_key(tag.run_id, tag.stage, tag.turn));
  if (it == entries_.end()) it = entries_.find(script_key("*", tag.stage, tag.turn));
  if (it == entries_.end()) {
    throw ScriptExhaustedError("script " + id_ + " has no entry for (" + tag.run_id + ", " + tag.stage +
                               ", " + tag.turn + ")");
  }
  CompletionResult out{it->second.text, it->second.input_tokens, it->second.output_tokens, id_, 1};
  entries_.erase(it);
  return out;
}

std::size_t ScriptedBackend::remaining() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

// ---- content-addressed cache -------------------------------------------------

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

std::string cache_key(std::string_view backend_id, std::string_view model,
                      const std::vector<ChatMessage>& messages, const CompletionParams& params) {
  const json material{{"backend_id", backend_id}, {"model", model}, {"messages", messages}, {"params", params}};
  return sha256_hex(material.dump());
}

CachedBackend::CachedBackend(BackendPtr inner, std::filesystem::path dir)
    : inner_(std::move(inner)), dir_(std::move(dir)) {
  if (!inner_) throw ConfigError("cached backend needs an inner backend");
  std::filesystem::create_directories(dir_);
}

CompletionResult CachedBackend::complete(const CompletionRequest& request) {
  const auto key = cache_key(inner_->id(), inner_->model(), request.messages, request.params);
  const auto path = dir_ / (key + ".json");
  {
    std::ifstream in(path, std::ios::binary);
    if (in) {
      try {
        auto doc = json::parse(in);
        if (doc.at("key").get<std::string>() == key) {
          auto result = doc.at("result").get<CompletionResult>();
          ++hits_;
          return result;
        }
        ++corrupt_;
      } catch (const json::exception&) {
        ++corrupt_;
      }
    }
  }
  ++misses_;
  CompletionResult result = inner_->complete(request);
  const json doc{{"key", key}, {"result", result}};
  std::lock_guard lock(write_mu_);
  const auto tmp = dir_ / (key + ".json.tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write cache entry " + tmp.string());
    out << doc.dump();
  }
  std::filesystem::rename(tmp, path);
  return result;
}

void CachedBackend::clear() {
  std::lock_guard lock(write_mu_);
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.path().extension() == ".json") std::filesystem::remove(entry.path());
  }
}

// ---- category fallback -------------------------------------------------------

CategoryFallback make_backend_category_fallback(BackendPtr backend) {
  return [backend = std::move(backend)](std::string_view raw) -> std::optional<Category> {
    CompletionRequest req;
    req.messages = {
        {MessageRole::system,
         "You classify retail product categories. Answer with exactly one word: Food, Fashion, Home, or "
         "Electronics."},
        {MessageRole::user, "Product category: " + std::string(raw)}};
    req.tag = {"ingest", "category_fallback", std::string(raw)};
    const auto result = backend->complete(req);
    std::string word;
    for (char c : result.text) {
      if (std::isalpha(static_cast<unsigned char>(c))) {
        word += c;
      } else if (!word.empty()) {
        if (auto cat = parse_category_name(word)) return cat;
        word.clear();
      }
    }
    if (!word.empty()) return parse_category_name(word);
    return std::nullopt;
  };
}

}  // namespace shopsim
