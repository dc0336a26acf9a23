#include "tabprov/llm.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tabprov/errors.hpp"
#include "tabprov/table.hpp"

namespace tabprov {

LlmKind parse_llm_kind(std::string_view name) {
  if (name == "remote") return LlmKind::remote;
  if (name == "scripted-stub" || name == "stub") return LlmKind::scripted_stub;
  throw ConfigError(fmt::format("unknown llm kind '{}'", name));
}

ScriptedLlm::ScriptedLlm(std::map<std::string, std::string> script) : script_(std::move(script)) {}

ScriptedLlm::ScriptedLlm(ScriptedLlm&& other) noexcept : script_(std::move(other.script_)) {
  std::lock_guard lock(other.mutex_);
  prompts_ = std::move(other.prompts_);
}

ScriptedLlm ScriptedLlm::from_json(std::string_view document) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(fmt::format("LLM script does not parse: {}", e.what()));
  }
  if (!doc.is_object()) throw ConfigError("LLM script must be a JSON object of digest -> reply");
  std::map<std::string, std::string> script;
  for (const auto& [key, value] : doc.items()) {
    if (!value.is_string()) throw ConfigError(fmt::format("LLM script entry '{}' must be a string", key));
    script.emplace(key, value.get<std::string>());
  }
  return ScriptedLlm(std::move(script));
}

ScriptedLlm ScriptedLlm::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open LLM script '{}'", path));
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

ScriptedLlm ScriptedLlm::constant(std::string reply) {
  return ScriptedLlm({{"*", std::move(reply)}});
}

std::string ScriptedLlm::complete(const std::string& prompt) const {
  {
    std::lock_guard lock(mutex_);
    prompts_.push_back(prompt);
  }
  if (auto it = script_.find(sha256(prompt).hex()); it != script_.end()) return it->second;
  if (auto it = script_.find("*"); it != script_.end()) return it->second;
  throw ProviderError("scripted LLM has no reply for this prompt and no \"*\" default");
}

std::vector<std::string> ScriptedLlm::prompts() const {
  std::lock_guard lock(mutex_);
  return prompts_;
}

std::unique_ptr<LlmClient> make_llm_client(const LlmClientSpec& spec) {
  if (spec.kind == LlmKind::remote) return std::make_unique<RemoteLlm>(spec);
  if (spec.script_path.empty()) return std::make_unique<ScriptedLlm>(ScriptedLlm::constant(""));
  return std::make_unique<ScriptedLlm>(ScriptedLlm::from_file(spec.script_path));
}

}  // namespace tabprov
