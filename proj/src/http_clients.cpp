// Remote embedding and chat-completion clients. This is the only translation
// unit that includes httplib.

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "tabprov/embeddings.hpp"
#include "tabprov/errors.hpp"
#include "tabprov/llm.hpp"

namespace tabprov {

namespace {

using nlohmann::json;

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError(fmt::format("endpoint '{}' has no scheme", url));
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

httplib::Headers auth_headers(const std::string& env_name) {
  httplib::Headers headers;
  if (env_name.empty()) return headers;
  if (const char* key = std::getenv(env_name.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  return headers;
}

// POSTs `body`, retrying with exponential backoff. Returns the parsed reply.
json post_json(const std::string& url, const json& body, const std::string& key_env, int max_retries,
               std::chrono::milliseconds backoff, std::size_t* request_counter) {
  const auto endpoint = split_endpoint(url);
  const auto payload = body.dump();
  int last_status = 0;
  std::string last_error;
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(backoff * (1 << (attempt - 1)));
    httplib::Client client(endpoint.base);
    client.set_connection_timeout(std::chrono::seconds(10));
    client.set_read_timeout(std::chrono::seconds(60));
    if (request_counter) ++*request_counter;
    auto res = client.Post(endpoint.path, auth_headers(key_env), payload, "application/json");
    if (!res) {
      last_status = 0;
      last_error = httplib::to_string(res.error());
      continue;
    }
    last_status = res->status;
    if (res->status != 200) {
      last_error = fmt::format("HTTP {}", res->status);
      // Client errors will not improve on retry.
      if (res->status >= 400 && res->status < 500 && res->status != 429) break;
      continue;
    }
    try {
      return json::parse(res->body);
    } catch (const json::parse_error& e) {
      throw ProviderError(fmt::format("{}: malformed reply: {}", url, e.what()), res->status);
    }
  }
  throw ProviderError(fmt::format("{}: request failed: {}", url, last_error), last_status);
}

}  // namespace

RemoteEmbedder::RemoteEmbedder(EmbedderSpec spec) : spec_(std::move(spec)) {
  if (spec_.endpoint.empty()) throw ConfigError("remote embedder requires embedder.endpoint");
  if (spec_.model.empty()) throw ConfigError("remote embedder requires embedder.model");
  split_endpoint(spec_.endpoint);
}

std::size_t RemoteEmbedder::request_count() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

std::vector<EmbeddingVector> RemoteEmbedder::fetch(std::span<const std::string> texts) const {
  json body = {{"model", spec_.model}, {"input", texts}};
  std::size_t requests = 0;
  json reply;
  try {
    reply = post_json(spec_.endpoint, body, spec_.api_key_env, spec_.max_retries, spec_.backoff, &requests);
  } catch (...) {
    std::lock_guard lock(mutex_);
    requests_ += requests;
    throw;
  }
  {
    std::lock_guard lock(mutex_);
    requests_ += requests;
  }
  const auto data = reply.find("data");
  if (data == reply.end() || !data->is_array() || data->size() != texts.size()) {
    throw ProviderError(fmt::format("{}: reply has no matching \"data\" array", spec_.endpoint), 200);
  }
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& item : *data) {
    const auto emb = item.find("embedding");
    if (emb == item.end() || !emb->is_array() || emb->size() != spec_.dimension) {
      throw ProviderError(
          fmt::format("{}: embedding missing or not of dimension {}", spec_.endpoint, spec_.dimension), 200);
    }
    EmbeddingVector v{emb->get<std::vector<double>>()};
    const double n = v.norm();
    if (n > 0.0) {
      for (double& x : v.values) x /= n;
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(std::span<const std::string> texts) const {
  constexpr std::size_t kMaxBatch = 64;
  std::vector<EmbeddingVector> out(texts.size());
  std::vector<std::string> keys(texts.size());
  std::vector<std::string> missing;
  std::vector<std::size_t> missing_at;
  {
    std::lock_guard lock(mutex_);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      if (texts[i].find_first_not_of(" \t\r\n\f\v") == std::string::npos) {
        out[i] = EmbeddingVector{std::vector<double>(spec_.dimension, 0.0)};
        continue;
      }
      keys[i] = sha256(spec_.model + '\0' + texts[i]).hex();
      if (auto it = cache_.find(keys[i]); it != cache_.end()) {
        out[i] = it->second;
      } else {
        missing.push_back(texts[i]);
        missing_at.push_back(i);
      }
    }
  }
  for (std::size_t start = 0; start < missing.size(); start += kMaxBatch) {
    const std::size_t n = std::min(kMaxBatch, missing.size() - start);
    auto fetched = fetch(std::span<const std::string>(missing).subspan(start, n));
    std::lock_guard lock(mutex_);
    for (std::size_t k = 0; k < n; ++k) {
      const auto at = missing_at[start + k];
      cache_[keys[at]] = fetched[k];
      out[at] = std::move(fetched[k]);
    }
  }
  return out;
}

RemoteLlm::RemoteLlm(LlmClientSpec spec) : spec_(std::move(spec)) {
  if (spec_.endpoint.empty()) throw ConfigError("remote LLM requires llm.endpoint");
  if (spec_.model.empty()) throw ConfigError("remote LLM requires llm.model");
  split_endpoint(spec_.endpoint);
}

std::string RemoteLlm::complete(const std::string& prompt) const {
  json body = {{"model", spec_.model}, {"messages", json::array({{{"role", "user"}, {"content", prompt}}})}};
  const auto reply = post_json(spec_.endpoint, body, spec_.api_key_env, spec_.max_retries, spec_.backoff, nullptr);
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw ProviderError(fmt::format("{}: reply lacks choices[0].message.content", spec_.endpoint), 200);
  }
}

}  // namespace tabprov
