#include "agency/config.hpp"

#include <charconv>
#include <sstream>

#include "agency/error.hpp"
#include "agency/serialization.hpp"

namespace agency::config {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

int to_int(const std::string& key, const std::string& value) {
  int out = 0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) throw ValidationError("config: '" + key + "' expects an integer, got '" + value + "'");
  return out;
}

}  // namespace

std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos && line.find('"') > hash) line.erase(hash);
    const auto t = trim(line);
    if (t.empty() || t.front() == '[') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
    auto key = trim(std::string_view(t).substr(0, eq));
    auto value = trim(std::string_view(t).substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"') {
      const auto close = value.find('"', 1);
      if (close == std::string::npos) throw ValidationError("config line " + std::to_string(lineno) + ": unterminated string");
      value = value.substr(1, close - 1);
    }
    if (key.empty()) throw ValidationError("config line " + std::to_string(lineno) + ": empty key");
    out[key] = value;
  }
  return out;
}

void apply(const std::map<std::string, std::string>& values, runtime::BackendConfig& config) {
  for (const auto& [key, value] : values) {
    if (key == "kind")
      config.kind = runtime::parse_backend_kind(value);
    else if (key == "model_id")
      config.model_id = value;
    else if (key == "reasoning_effort")
      config.reasoning_effort = runtime::parse_reasoning_effort(value);
    else if (key == "endpoint")
      config.endpoint = value;
    else if (key == "max_parallel")
      config.max_parallel = to_int(key, value);
    else if (key == "retry_max_attempts")
      config.retry.max_attempts = to_int(key, value);
    else if (key == "retry_base_backoff_ms")
      config.retry.base_backoff = std::chrono::milliseconds(to_int(key, value));
    else if (key == "request_timeout_s")
      config.request_timeout = std::chrono::seconds(to_int(key, value));
    else
      throw ValidationError("config: unknown key '" + key + "'");
  }
  config.validate();
}

runtime::BackendConfig load_backend_config(const std::filesystem::path& path, runtime::BackendConfig base) {
  config::apply(parse_key_values(io::read_file(path)), base);
  return base;
}

}  // namespace agency::config
