#pragma once

// `agency.toml`-style configuration: one `key = value` per line, `#` comments,
// optional double quotes around values, `[section]` lines ignored. Keys mirror
// BackendConfig: kind, model_id, reasoning_effort, endpoint, max_parallel,
// retry_max_attempts, retry_base_backoff_ms, request_timeout_s.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "agency/backend.hpp"

namespace agency::config {

// Throws ValidationError on a malformed line.
std::map<std::string, std::string> parse_key_values(std::string_view text);

// Throws ValidationError on an unknown key or a bad value.
void apply(const std::map<std::string, std::string>& values, runtime::BackendConfig& config);

runtime::BackendConfig load_backend_config(const std::filesystem::path& path,
                                           runtime::BackendConfig base = {});

}  // namespace agency::config
