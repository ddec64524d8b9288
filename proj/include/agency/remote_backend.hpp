#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "agency/backend.hpp"

namespace agency::runtime {

// OpenAI-compatible chat-completions client.
//
// Image attachments go out as data-URL image parts; other attachments as
// base64 text parts. HTTP 429, 5xx and connection failures raise
// TransportError so the caller can retry; other non-2xx statuses raise
// BackendError.
class RemoteBackend final : public ModelBackend {
 public:
  // `api_key` is sent as a bearer token and never written anywhere. When
  // `wire_dir` is set, each request/response pair is logged there with the
  // credential redacted.
  RemoteBackend(BackendConfig config, std::string api_key,
                std::optional<std::filesystem::path> wire_dir = std::nullopt);

  // Reads MODEL_API_KEY; throws ValidationError if it is unset.
  static std::string api_key_from_env();

  ChatResponse complete(const ChatRequest& request) override;

  // The JSON body sent for `request`; exposed for wire-format tests.
  nlohmann::json request_body(const ChatRequest& request) const;

 private:
  std::string api_key_;
  std::optional<std::filesystem::path> wire_dir_;
  std::string scheme_host_port_;
  std::string path_;
};

}  // namespace agency::runtime
