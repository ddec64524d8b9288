#pragma once

// Canonical JSON forms of the problem-model types.
//
// Field names match the struct members. Optional members are omitted when
// absent. Attachment bytes are stored base64-encoded under "data"; statement
// files may instead give a "path" relative to the statement file.

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "agency/error.hpp"
#include "agency/problem_model.hpp"

namespace agency::model {

void to_json(nlohmann::json& j, const Attachment& a);
void from_json(const nlohmann::json& j, Attachment& a);
void to_json(nlohmann::json& j, const Parameter& p);
void from_json(const nlohmann::json& j, Parameter& p);
void to_json(nlohmann::json& j, const ProblemStatement& s);
void from_json(const nlohmann::json& j, ProblemStatement& s);
void to_json(nlohmann::json& j, const Realization& r);
void from_json(const nlohmann::json& j, Realization& r);
void to_json(nlohmann::json& j, const Assessment& a);
void from_json(const nlohmann::json& j, Assessment& a);
void to_json(nlohmann::json& j, const Recommendation& r);
void from_json(const nlohmann::json& j, Recommendation& r);
void to_json(nlohmann::json& j, const Transcript& t);
void from_json(const nlohmann::json& j, Transcript& t);
void to_json(nlohmann::json& j, const GradingItem& i);
void from_json(const nlohmann::json& j, GradingItem& i);
void to_json(nlohmann::json& j, const GradingTemplate& t);
void from_json(const nlohmann::json& j, GradingTemplate& t);
void to_json(nlohmann::json& j, const ItemAward& a);
void from_json(const nlohmann::json& j, ItemAward& a);
void to_json(nlohmann::json& j, const Grade& g);
void from_json(const nlohmann::json& j, Grade& g);

std::string_view to_string(Verdict v);

}  // namespace agency::model

namespace agency::io {

std::string base64_encode(std::string_view bytes);
// Throws ValidationError on malformed input.
std::string base64_decode(std::string_view text);

// Throws ValidationError if the file cannot be read.
std::string read_file(const std::filesystem::path& path);
// Creates parent directories as needed.
void write_file(const std::filesystem::path& path, std::string_view contents);

// Parses JSON text, converting library errors into ValidationError tagged with `what`.
nlohmann::json parse_json(std::string_view text, std::string_view what);

// Pretty-printed, key-sorted, newline-terminated. Deterministic for equal values.
std::string dump_canonical(const nlohmann::json& j);

// Generic canonical round trip for any type with to_json/from_json.
template <typename T>
std::string serialize(const T& value) {
  return dump_canonical(nlohmann::json(value));
}

template <typename T>
T parse(std::string_view text, std::string_view what) {
  auto j = parse_json(text, what);
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string(what) + ": " + e.what());
  }
}

// Reads a statement file; attachments given by "path" are loaded relative to it.
model::ProblemStatement load_statement(const std::filesystem::path& path);
model::Transcript load_transcript(const std::filesystem::path& path);
model::GradingTemplate load_grading_template(const std::filesystem::path& path);

// Transcript JSON with created_at blanked and wall-clock metadata dropped, for
// comparing runs that should be identical.
std::string comparison_form(const model::Transcript& t);

// Writes <dir>/<problem_id>.transcript.json and <dir>/<problem_id>.transcript.md.
void persist_transcript(const model::Transcript& t, const std::filesystem::path& dir);

}  // namespace agency::io
