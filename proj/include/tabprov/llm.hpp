#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace tabprov {

enum class LlmKind { remote, scripted_stub };

LlmKind parse_llm_kind(std::string_view name);

struct LlmClientSpec {
  LlmKind kind = LlmKind::scripted_stub;
  // remote
  std::string endpoint;  // e.g. http://127.0.0.1:8080/v1/chat/completions
  std::string model;
  std::string api_key_env = "TABPROV_API_KEY";
  int max_retries = 3;
  std::chrono::milliseconds backoff{200};
  // scripted stub: JSON object mapping sha256(prompt) hex (or "*") to a reply
  std::string script_path;
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  /// Single-turn completion; throws ProviderError on failure.
  virtual std::string complete(const std::string& prompt) const = 0;
};

/// Replies are looked up by the SHA-256 hex digest of the prompt, falling
/// back to the "*" entry. Never touches the network.
class ScriptedLlm final : public LlmClient {
 public:
  explicit ScriptedLlm(std::map<std::string, std::string> script);
  ScriptedLlm(ScriptedLlm&& other) noexcept;
  /// Parses the JSON script document.
  static ScriptedLlm from_json(std::string_view document);
  static ScriptedLlm from_file(const std::string& path);
  /// Every prompt gets `reply`.
  static ScriptedLlm constant(std::string reply);

  std::string complete(const std::string& prompt) const override;

  std::vector<std::string> prompts() const;

 private:
  std::map<std::string, std::string> script_;
  mutable std::mutex mutex_;
  mutable std::vector<std::string> prompts_;
};

/// `{"model", "messages": [{"role": "user", "content"}]}` ->
/// `{"choices": [{"message": {"content"}}]}`.
class RemoteLlm final : public LlmClient {
 public:
  explicit RemoteLlm(LlmClientSpec spec);
  std::string complete(const std::string& prompt) const override;

 private:
  LlmClientSpec spec_;
};

std::unique_ptr<LlmClient> make_llm_client(const LlmClientSpec& spec);

}  // namespace tabprov
