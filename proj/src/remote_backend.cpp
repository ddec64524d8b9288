#include "agency/remote_backend.hpp"

#include <chrono>
#include <cstdlib>
#include <regex>

#include <httplib.h>

#include "agency/error.hpp"
#include "agency/serialization.hpp"

namespace agency::runtime {

using nlohmann::json;

namespace {

constexpr const char* kRedacted = "[REDACTED]";

std::string redact(std::string text, const std::string& secret) {
  if (secret.empty()) return text;
  for (auto pos = text.find(secret); pos != std::string::npos; pos = text.find(secret, pos))
    text.replace(pos, secret.size(), kRedacted);
  return text;
}

std::string file_stem_for(std::string session_id) {
  for (auto& c : session_id)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  return session_id;
}

}  // namespace

RemoteBackend::RemoteBackend(BackendConfig config, std::string api_key,
                             std::optional<std::filesystem::path> wire_dir)
    : ModelBackend(std::move(config)), api_key_(std::move(api_key)), wire_dir_(std::move(wire_dir)) {
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  const auto& endpoint = this->config().endpoint;
  if (!std::regex_match(endpoint, m, kUrl)) throw ValidationError("remote backend: malformed endpoint '" + endpoint + "'");
  scheme_host_port_ = m[1].str();
  path_ = m[2].matched ? m[2].str() : "/v1/chat/completions";
}

std::string RemoteBackend::api_key_from_env() {
  const char* key = std::getenv("MODEL_API_KEY");
  if (key == nullptr || *key == '\0') throw ValidationError("MODEL_API_KEY is not set");
  return key;
}

json RemoteBackend::request_body(const ChatRequest& request) const {
  json content = json::array();
  content.push_back({{"type", "text"}, {"text", request.user_text}});
  for (const auto& a : request.attachments) {
    const auto data = io::base64_encode(a.bytes);
    if (a.media_type.rfind("image/", 0) == 0) {
      content.push_back(
          {{"type", "image_url"}, {"image_url", {{"url", "data:" + a.media_type + ";base64," + data}}}});
    } else {
      content.push_back({{"type", "text"},
                         {"text", "Attachment " + a.filename + " (" + a.media_type + "), base64:\n" + data}});
    }
  }
  return json{{"model", config().model_id},
              {"reasoning_effort", std::string(to_string(config().reasoning_effort))},
              {"messages",
               json::array({json{{"role", "system"}, {"content", request.system_text}},
                            json{{"role", "user"}, {"content", std::move(content)}}})}};
}

ChatResponse RemoteBackend::complete(const ChatRequest& request) {
  const auto body = request_body(request).dump();
  const auto stem = wire_dir_ ? file_stem_for(request.session_id) : std::string{};
  if (wire_dir_) {
    json log{{"url", scheme_host_port_ + path_},
             {"headers", {{"Authorization", std::string("Bearer ") + kRedacted}}},
             {"body", json::parse(body)}};
    io::write_file(*wire_dir_ / (stem + ".request.json"), redact(io::dump_canonical(log), api_key_));
  }

  // A new client per call: no connection or conversation state is shared between sessions.
  httplib::Client client(scheme_host_port_);
  const auto timeout = config().request_timeout;
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(), 0);
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(), 0);
  client.set_write_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(), 0);
  httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};

  auto res = client.Post(path_, headers, body, "application/json");
  if (!res) throw TransportError("remote backend: " + httplib::to_string(res.error()));

  if (wire_dir_) {
    json log{{"status", res->status}, {"body", res->body}};
    io::write_file(*wire_dir_ / (stem + ".response.json"), redact(io::dump_canonical(log), api_key_));
  }

  if (res->status == 429 || res->status >= 500)
    throw TransportError("remote backend: HTTP " + std::to_string(res->status));
  if (res->status < 200 || res->status >= 300)
    throw BackendError("remote backend: HTTP " + std::to_string(res->status) + ": " +
                       redact(res->body.substr(0, 512), api_key_));

  json parsed;
  try {
    parsed = json::parse(res->body);
  } catch (const json::exception& e) {
    throw BackendError(std::string("remote backend: response is not JSON: ") + e.what());
  }

  ChatResponse out;
  try {
    const auto& message = parsed.at("choices").at(0).at("message");
    if (auto it = message.find("content"); it != message.end() && it->is_string()) out.text = it->get<std::string>();
  } catch (const json::exception& e) {
    throw BackendError(std::string("remote backend: unexpected response shape: ") + e.what());
  }
  if (auto it = parsed.find("model"); it != parsed.end() && it->is_string()) out.metadata["model_id"] = *it;
  if (auto usage = parsed.find("usage"); usage != parsed.end() && usage->is_object()) {
    for (const char* key : {"prompt_tokens", "completion_tokens", "total_tokens"})
      if (auto v = usage->find(key); v != usage->end() && v->is_number_integer())
        out.metadata[key] = std::to_string(v->get<long long>());
  }
  return out;
}

}  // namespace agency::runtime
