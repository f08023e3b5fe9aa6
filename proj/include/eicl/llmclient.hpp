#pragma once

// Completion providers behind one interface: live chat-completion endpoints
// over HTTP, recorded transcripts, and a prototype-similarity mock model.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "eicl/decision.hpp"
#include "eicl/error.hpp"
#include "eicl/matrix.hpp"
#include "eicl/prototype.hpp"
#include "eicl/tensor_file.hpp"

namespace eicl {

class ProviderError : public Error {
 public:
  using Error::Error;
};

class ReplayMiss : public ProviderError {
 public:
  explicit ReplayMiss(std::string hash)
      : ProviderError("replay miss: no transcript entry for hash " + hash), hash_(std::move(hash)) {}
  [[nodiscard]] const std::string& hash() const noexcept { return hash_; }

 private:
  std::string hash_;
};

class MalformedResponse : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

enum class ProviderKind { kHttp, kReplay, kPrototypeSim };

inline std::string_view provider_kind_name(ProviderKind k) {
  switch (k) {
    case ProviderKind::kHttp: return "http";
    case ProviderKind::kReplay: return "replay";
    case ProviderKind::kPrototypeSim: return "prototype_sim";
  }
  return "?";
}

inline ProviderKind parse_provider_kind(std::string_view s) {
  if (s == "http") return ProviderKind::kHttp;
  if (s == "replay") return ProviderKind::kReplay;
  if (s == "prototype_sim") return ProviderKind::kPrototypeSim;
  throw ArgumentError("unknown provider '" + std::string(s) + "' (expected http|replay|prototype_sim)");
}

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{8000};
};

struct HttpSettings {
  // Full URL, e.g. https://api.openai.com/v1/chat/completions
  std::string endpoint;
  std::string model;
  // Environment variable holding the bearer token; empty sends no auth header.
  std::string api_key_env = "OPENAI_API_KEY";
  // JSON pointer to the message text in the response body.
  std::string content_path = "/choices/0/message/content";
  std::optional<double> temperature;
  std::chrono::seconds timeout{60};
};

struct PrototypeSimSettings {
  std::filesystem::path bank_path;
  // Tensor [n, d] whose row names are texts: the model's own reading of each
  // query before any example influence.
  std::filesystem::path perception_path;
  double temperature = 0.05;
  // Weight of the mean example-label prototype added to the query reading.
  double example_gain = 1.0;
  // Stage two runs only when the best secondary score beats the best primary
  // score by more than this.
  double fit_margin = 0.0;
};

struct ProviderConfig {
  ProviderKind kind = ProviderKind::kReplay;
  HttpSettings http;
  std::filesystem::path transcript_path;
  PrototypeSimSettings sim;
  std::size_t max_concurrency = 4;
  RetryPolicy retry;

  void validate() const {
    if (max_concurrency < 1) throw ArgumentError("max_concurrency must be at least 1");
    if (retry.max_attempts < 1) throw ArgumentError("retry attempts must be at least 1");
    switch (kind) {
      case ProviderKind::kHttp:
        if (http.endpoint.empty()) throw ArgumentError("http provider needs an endpoint");
        if (http.model.empty()) throw ArgumentError("http provider needs a model");
        break;
      case ProviderKind::kReplay:
        if (transcript_path.empty()) throw ArgumentError("replay provider needs a transcript path");
        break;
      case ProviderKind::kPrototypeSim:
        if (sim.bank_path.empty() || sim.perception_path.empty()) {
          throw ArgumentError("prototype_sim provider needs bank and perception paths");
        }
        if (!(sim.temperature >= 0.0)) throw ArgumentError("prototype_sim temperature must be >= 0");
        break;
    }
  }
};

class LlmProvider {
 public:
  virtual ~LlmProvider() = default;
  virtual std::string complete(const PromptBundle& prompt) = 0;
  [[nodiscard]] virtual std::size_t max_concurrency() const { return 1; }
  [[nodiscard]] virtual std::string describe() const = 0;
};

// ---------------------------------------------------------------------------
// Transcripts

struct TranscriptEntry {
  std::string hash;
  std::string mode;
  std::string prompt_text;
  std::string response_text;
};

inline std::vector<TranscriptEntry> read_transcript(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open transcript " + path.string());
  std::vector<TranscriptEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("hash").get<std::string>(), j.value("mode", std::string{}),
                     j.value("prompt_text", std::string{}), j.at("response_text").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ": malformed transcript line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline void write_transcript(const std::filesystem::path& path, const std::vector<TranscriptEntry>& entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (const auto& e : entries) {
    nlohmann::ordered_json j{{"hash", e.hash}, {"mode", e.mode}, {"prompt_text", e.prompt_text},
                             {"response_text", e.response_text}};
    out << j.dump() << '\n';
  }
}

class ReplayProvider final : public LlmProvider {
 public:
  explicit ReplayProvider(const std::vector<TranscriptEntry>& entries) {
    for (const auto& e : entries) table_.insert_or_assign(e.hash, e.response_text);
  }
  explicit ReplayProvider(const std::filesystem::path& path) : ReplayProvider(read_transcript(path)) {}

  std::string complete(const PromptBundle& prompt) override {
    const std::string h = prompt.hash();
    auto it = table_.find(h);
    if (it == table_.end()) throw ReplayMiss(h);
    return it->second;
  }
  [[nodiscard]] std::size_t max_concurrency() const override { return 64; }
  [[nodiscard]] std::string describe() const override { return "replay"; }

 private:
  std::unordered_map<std::string, std::string> table_;
};

// Wraps a provider and keeps every successful exchange for a transcript.
class RecordingProvider final : public LlmProvider {
 public:
  explicit RecordingProvider(LlmProvider& inner) : inner_(inner) {}

  std::string complete(const PromptBundle& prompt) override {
    std::string response = inner_.complete(prompt);
    std::lock_guard lock(mu_);
    entries_.push_back({prompt.hash(), std::string(mode_name(prompt.mode)), prompt.text, response});
    return response;
  }
  [[nodiscard]] std::size_t max_concurrency() const override { return inner_.max_concurrency(); }
  [[nodiscard]] std::string describe() const override { return inner_.describe(); }

  // Sorted by hash so the file does not depend on completion order.
  [[nodiscard]] std::vector<TranscriptEntry> entries() const {
    std::lock_guard lock(mu_);
    auto out = entries_;
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.hash < b.hash; });
    out.erase(std::unique(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.hash == b.hash; }),
              out.end());
    return out;
  }

 private:
  LlmProvider& inner_;
  mutable std::mutex mu_;
  std::vector<TranscriptEntry> entries_;
};

// ---------------------------------------------------------------------------
// HTTP chat completions

struct ParsedUrl {
  std::string scheme_host_port;  // "https://host:443"
  std::string path;              // "/v1/chat/completions"
};

inline ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ArgumentError("endpoint '" + url + "' has no scheme");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttpProvider final : public LlmProvider {
 public:
  HttpProvider(HttpSettings settings, RetryPolicy retry, std::size_t max_concurrency)
      : settings_(std::move(settings)),
        retry_(retry),
        max_concurrency_(max_concurrency),
        slots_(static_cast<std::ptrdiff_t>(max_concurrency)),
        url_(parse_url(settings_.endpoint)) {
    if (max_concurrency < 1) throw ArgumentError("max_concurrency must be at least 1");
    if (!settings_.api_key_env.empty()) {
      if (const char* key = std::getenv(settings_.api_key_env.c_str())) api_key_ = key;
    }
  }

  std::string complete(const PromptBundle& prompt) override {
    nlohmann::json body{{"model", settings_.model},
                        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt.text}}})}};
    if (settings_.temperature) body["temperature"] = *settings_.temperature;
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (!settings_.api_key_env.empty()) {
      if (api_key_.empty()) throw ProviderError("credentials missing: environment variable " + settings_.api_key_env + " is not set");
      headers.emplace("Authorization", "Bearer " + api_key_);
    }

    auto backoff = retry_.initial_backoff;
    std::string last_error;
    for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
      int status = -1;
      std::string response_body;
      std::optional<std::chrono::milliseconds> retry_after;
      {
        slots_.acquire();
        struct Release {
          std::counting_semaphore<>& s;
          ~Release() { s.release(); }
        } release{slots_};
        httplib::Client client(url_.scheme_host_port);
        client.set_connection_timeout(settings_.timeout);
        client.set_read_timeout(settings_.timeout);
        client.set_write_timeout(settings_.timeout);
        auto res = client.Post(url_.path, headers, payload, "application/json");
        if (res) {
          status = res->status;
          response_body = res->body;
          if (res->has_header("Retry-After")) {
            try {
              retry_after = std::chrono::seconds(std::stoi(res->get_header_value("Retry-After")));
            } catch (const std::exception&) {
            }
          }
        } else {
          last_error = "transport error: " + httplib::to_string(res.error());
        }
      }

      if (status >= 200 && status < 300) return extract_content(response_body);
      if (status == 401 || status == 403) {
        throw ProviderError("authentication failed (HTTP " + std::to_string(status) + ")");
      }
      const bool transient = status == -1 || status == 408 || status == 429 || status >= 500;
      if (status != -1) last_error = "HTTP " + std::to_string(status);
      if (!transient) throw ProviderError("request failed: " + last_error + ": " + response_body.substr(0, 200));
      if (attempt == retry_.max_attempts) break;

      auto wait = backoff;
      if (retry_after && *retry_after > wait) wait = std::min(*retry_after, retry_.max_backoff);
      std::this_thread::sleep_for(wait);
      backoff = std::min(retry_.max_backoff, std::chrono::milliseconds(static_cast<std::int64_t>(
                                                 static_cast<double>(backoff.count()) * retry_.multiplier)));
    }
    throw ProviderError("request failed after " + std::to_string(retry_.max_attempts) + " attempts: " + last_error);
  }

  [[nodiscard]] std::size_t max_concurrency() const override { return max_concurrency_; }
  [[nodiscard]] std::string describe() const override { return "http:" + settings_.model; }

 private:
  [[nodiscard]] std::string extract_content(const std::string& body) const {
    try {
      const auto j = nlohmann::json::parse(body);
      const auto& node = j.at(nlohmann::json::json_pointer(settings_.content_path));
      if (!node.is_string()) throw MalformedResponse("content at " + settings_.content_path + " is not a string");
      return node.get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw MalformedResponse(std::string("malformed provider response: ") + e.what());
    }
  }

  HttpSettings settings_;
  RetryPolicy retry_;
  std::size_t max_concurrency_;
  std::counting_semaphore<> slots_;
  ParsedUrl url_;
  std::string api_key_;
};

// ---------------------------------------------------------------------------
// Prototype-similarity mock

class PrototypeSimProvider final : public LlmProvider {
 public:
  PrototypeSimProvider(PrototypeBank bank, std::unordered_map<std::string, std::vector<double>> perception,
                       PrototypeSimSettings settings)
      : bank_(std::move(bank)), perception_(std::move(perception)), settings_(std::move(settings)) {
    bank_.validate();
    for (const auto& [text, v] : perception_) {
      if (v.size() != bank_.dim()) throw ValidationError("perception vector dimension does not match the bank");
    }
  }

  explicit PrototypeSimProvider(const PrototypeSimSettings& settings)
      : PrototypeSimProvider(read_bank(settings.bank_path), read_perception(settings.perception_path), settings) {}

  static std::unordered_map<std::string, std::vector<double>> read_perception(const std::filesystem::path& path) {
    const Tensor t = read_tensor(path);
    if (t.shape.size() != 2 || !t.names || t.names->size() != t.shape[0]) {
      throw ValidationError(path.string() + ": perception tensor must be [n, d] with one name per row");
    }
    std::unordered_map<std::string, std::vector<double>> out;
    const std::size_t d = t.shape[1];
    for (std::size_t i = 0; i < t.shape[0]; ++i) {
      out.emplace((*t.names)[i], std::vector<double>(t.values.begin() + static_cast<std::ptrdiff_t>(i * d),
                                                     t.values.begin() + static_cast<std::ptrdiff_t>((i + 1) * d)));
    }
    return out;
  }

  // The representation the decision is made from: the query reading shifted
  // towards the prototypes of the example labels, weighted by label weight.
  [[nodiscard]] std::vector<double> query_representation(const PromptBundle& prompt) const {
    auto it = perception_.find(prompt.query_text);
    if (it == perception_.end()) throw ProviderError("prototype_sim has no representation for the query text");
    std::vector<double> h = it->second;
    if (!prompt.examples.empty()) {
      const double scale = settings_.example_gain / static_cast<double>(prompt.examples.size());
      for (const auto& ex : prompt.examples) {
        for (const auto& [label, w] : ex.labels) {
          const auto row = bank_.vectors.row(bank_.index_of(label));
          for (std::size_t k = 0; k < h.size(); ++k) h[k] += scale * w * row[k];
        }
      }
    }
    return h;
  }

  // Two-stage prompts restrict the choice to the primary labels unless a
  // secondary label outscores every primary one by more than fit_margin.
  [[nodiscard]] PrototypeDecision decide(const PromptBundle& prompt) const {
    const auto h = query_representation(prompt);
    if (prompt.mode == PromptMode::kEicl && prompt.split && !prompt.split->secondary.empty()) {
      auto first = prototype_decision(h, bank_, prompt.split->primary, settings_.temperature);
      double best_secondary = -std::numeric_limits<double>::infinity();
      for (const auto& l : prompt.split->secondary) best_secondary = std::max(best_secondary, first.scores[bank_.index_of(l)]);
      const double best_primary = first.scores[bank_.index_of(first.label)];
      if (best_secondary - best_primary > settings_.fit_margin) {
        return prototype_decision(h, bank_, prompt.split->secondary, settings_.temperature);
      }
      return first;
    }
    return prototype_decision(h, bank_, prompt.expected_labels, settings_.temperature);
  }

  std::string complete(const PromptBundle& prompt) override { return "Emotion: " + decide(prompt).label; }
  [[nodiscard]] std::size_t max_concurrency() const override { return 64; }
  [[nodiscard]] std::string describe() const override { return "prototype_sim"; }
  [[nodiscard]] const PrototypeBank& bank() const noexcept { return bank_; }

 private:
  PrototypeBank bank_;
  std::unordered_map<std::string, std::vector<double>> perception_;
  PrototypeSimSettings settings_;
};

inline std::unique_ptr<LlmProvider> make_provider(const ProviderConfig& cfg) {
  cfg.validate();
  switch (cfg.kind) {
    case ProviderKind::kHttp: return std::make_unique<HttpProvider>(cfg.http, cfg.retry, cfg.max_concurrency);
    case ProviderKind::kReplay: return std::make_unique<ReplayProvider>(cfg.transcript_path);
    case ProviderKind::kPrototypeSim: return std::make_unique<PrototypeSimProvider>(cfg.sim);
  }
  throw ArgumentError("unknown provider kind");
}

}  // namespace eicl
