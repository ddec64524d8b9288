#pragma once

// Model backends: the one seam between the pipeline and whatever produces text.

#include <chrono>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "agency/problem_model.hpp"

namespace agency::runtime {

enum class BackendKind { Remote, Simulated };
enum class ReasoningEffort { Low, Medium, High };
enum class AgentRole { Solve, Compare };

std::string_view to_string(BackendKind kind);
std::string_view to_string(ReasoningEffort effort);
std::string_view to_string(AgentRole role);
// Throw ValidationError on unknown names.
BackendKind parse_backend_kind(std::string_view text);
ReasoningEffort parse_reasoning_effort(std::string_view text);

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_backoff{500};
};

struct BackendConfig {
  BackendKind kind = BackendKind::Simulated;
  std::string model_id = "o4-mini";
  ReasoningEffort reasoning_effort = ReasoningEffort::High;
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  int max_parallel = 4;
  RetryPolicy retry;
  std::chrono::seconds request_timeout{600};

  // Throws ValidationError if max_parallel < 1 or retry.max_attempts < 1.
  void validate() const;
  // Flat key/value view recorded in transcripts. Never contains credentials.
  std::map<std::string, std::string> snapshot() const;
};

// One stateless chat exchange. Every call carries its own session id; nothing
// from one request is visible to another.
struct ChatRequest {
  AgentRole role = AgentRole::Solve;
  std::string session_id;
  std::size_t index = 0;  // realization index for Solve; 0 for Compare
  std::string system_text;
  std::string user_text;
  std::span<const model::Attachment> attachments;
  // Ground-truth hook for simulated backends; remote backends ignore it.
  std::span<const model::Realization> realizations;
};

struct ChatResponse {
  std::string text;
  // Set only by backends that know the answer's equivalence class (simulation).
  std::optional<std::string> class_label;
  std::map<std::string, std::string> metadata;
};

// Implementations must be safe to call from several threads at once.
class ModelBackend {
 public:
  explicit ModelBackend(BackendConfig config) : config_(std::move(config)) { config_.validate(); }
  virtual ~ModelBackend() = default;

  ModelBackend(const ModelBackend&) = delete;
  ModelBackend& operator=(const ModelBackend&) = delete;

  // Throws TransportError for retryable failures, BackendError otherwise.
  virtual ChatResponse complete(const ChatRequest& request) = 0;

  const BackendConfig& config() const noexcept { return config_; }

 private:
  BackendConfig config_;
};

}  // namespace agency::runtime
