#include "agency/serialization.hpp"

#include <fstream>
#include <sstream>

#include <openssl/evp.h>

namespace agency::model {

using nlohmann::json;

namespace {

template <typename T>
void put_optional(json& j, const char* key, const std::optional<T>& value) {
  if (value) j[key] = *value;
}

template <typename T>
void get_optional(const json& j, const char* key, std::optional<T>& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null())
    out = it->template get<T>();
  else
    out.reset();
}

}  // namespace

void to_json(json& j, const Attachment& a) {
  j = json{{"filename", a.filename}, {"media_type", a.media_type}, {"data", io::base64_encode(a.bytes)}};
}

void from_json(const json& j, Attachment& a) {
  j.at("filename").get_to(a.filename);
  j.at("media_type").get_to(a.media_type);
  a.bytes = io::base64_decode(j.at("data").get<std::string>());
}

void to_json(json& j, const Parameter& p) {
  j = json{{"name", p.name}, {"description", p.description}, {"domain_description", p.domain_description}};
}

void from_json(const json& j, Parameter& p) {
  j.at("name").get_to(p.name);
  p.description = j.value("description", "");
  p.domain_description = j.value("domain_description", "");
}

void to_json(json& j, const ProblemStatement& s) {
  j = json{{"id", s.id},
           {"title", s.title},
           {"body_text", s.body_text},
           {"attachments", s.attachments},
           {"qoi", s.qoi}};
  put_optional(j, "parameters", s.parameters);
  put_optional(j, "engineering_context", s.engineering_context);
}

void from_json(const json& j, ProblemStatement& s) {
  j.at("id").get_to(s.id);
  s.title = j.value("title", "");
  s.body_text = j.value("body_text", "");
  s.attachments = j.value("attachments", std::vector<Attachment>{});
  j.at("qoi").get_to(s.qoi);
  get_optional(j, "parameters", s.parameters);
  get_optional(j, "engineering_context", s.engineering_context);
}

void to_json(json& j, const Realization& r) {
  j = json{{"index", r.index},
           {"part1_data_completion", r.part1_data_completion},
           {"part2_model", r.part2_model},
           {"part3_solution_procedure", r.part3_solution_procedure},
           {"part4_verification_validation", r.part4_verification_validation},
           {"raw_output", r.raw_output},
           {"backend_metadata", r.backend_metadata}};
  put_optional(j, "class_label", r.class_label);
  put_optional(j, "approximation_error_note", r.approximation_error_note);
}

void from_json(const json& j, Realization& r) {
  j.at("index").get_to(r.index);
  j.at("part1_data_completion").get_to(r.part1_data_completion);
  j.at("part2_model").get_to(r.part2_model);
  j.at("part3_solution_procedure").get_to(r.part3_solution_procedure);
  j.at("part4_verification_validation").get_to(r.part4_verification_validation);
  j.at("raw_output").get_to(r.raw_output);
  r.backend_metadata = j.value("backend_metadata", std::map<std::string, std::string>{});
  get_optional(j, "class_label", r.class_label);
  get_optional(j, "approximation_error_note", r.approximation_error_note);
}

void to_json(json& j, const Assessment& a) { j = json{{"index", a.index}, {"text", a.text}}; }

void from_json(const json& j, Assessment& a) {
  j.at("index").get_to(a.index);
  j.at("text").get_to(a.text);
}

void to_json(json& j, const Recommendation& r) {
  j = json{{"discussion", r.discussion},
           {"recommended_solution", r.recommended_solution},
           {"per_realization_assessments", r.per_realization_assessments},
           {"secondary_opinions_noted", r.secondary_opinions_noted}};
}

void from_json(const json& j, Recommendation& r) {
  j.at("discussion").get_to(r.discussion);
  j.at("recommended_solution").get_to(r.recommended_solution);
  j.at("per_realization_assessments").get_to(r.per_realization_assessments);
  j.at("secondary_opinions_noted").get_to(r.secondary_opinions_noted);
}

void to_json(json& j, const Transcript& t) {
  j = json{{"problem_id", t.problem_id},
           {"n", t.n},
           {"realizations", t.realizations},
           {"created_at", t.created_at},
           {"agency_config_snapshot", t.agency_config_snapshot}};
  put_optional(j, "recommendation", t.recommendation);
}

void from_json(const json& j, Transcript& t) {
  j.at("problem_id").get_to(t.problem_id);
  j.at("n").get_to(t.n);
  j.at("realizations").get_to(t.realizations);
  j.at("created_at").get_to(t.created_at);
  t.agency_config_snapshot = j.value("agency_config_snapshot", std::map<std::string, std::string>{});
  get_optional(j, "recommendation", t.recommendation);
}

void to_json(json& j, const GradingItem& i) { j = json{{"criterion_text", i.criterion_text}, {"points", i.points}}; }

void from_json(const json& j, GradingItem& i) {
  j.at("criterion_text").get_to(i.criterion_text);
  j.at("points").get_to(i.points);
}

void to_json(json& j, const GradingTemplate& t) {
  j = json{{"problem_id", t.problem_id}, {"items", t.items}, {"threshold", t.threshold}};
}

void from_json(const json& j, GradingTemplate& t) {
  j.at("problem_id").get_to(t.problem_id);
  j.at("items").get_to(t.items);
  t.threshold = j.value("threshold", kDefaultGradeThreshold);
}

void to_json(json& j, const ItemAward& a) {
  j = json{{"criterion_text", a.criterion_text}, {"awarded_points", a.awarded_points}};
}

void from_json(const json& j, ItemAward& a) {
  j.at("criterion_text").get_to(a.criterion_text);
  j.at("awarded_points").get_to(a.awarded_points);
}

std::string_view to_string(Verdict v) { return v == Verdict::Correct ? "Correct" : "Incorrect"; }

void to_json(json& j, const Grade& g) {
  j = json{{"value", g.value}, {"verdict", to_string(g.verdict)}, {"item_awards", g.item_awards}};
}

void from_json(const json& j, Grade& g) {
  j.at("value").get_to(g.value);
  const auto verdict = j.at("verdict").get<std::string>();
  if (verdict == "Correct")
    g.verdict = Verdict::Correct;
  else if (verdict == "Incorrect")
    g.verdict = Verdict::Incorrect;
  else
    throw ValidationError("grade: unknown verdict '" + verdict + "'");
  j.at("item_awards").get_to(g.item_awards);
}

}  // namespace agency::model

namespace agency::io {

using nlohmann::json;

std::string base64_encode(std::string_view bytes) {
  if (bytes.empty()) return {};
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_decode(std::string_view text) {
  if (text.empty()) return {};
  if (text.size() % 4 != 0) throw ValidationError("base64: length is not a multiple of 4");
  std::string out(3 * (text.size() / 4), '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
  if (n < 0) throw ValidationError("base64: malformed input");
  // EVP_DecodeBlock counts padding as zero bytes.
  std::size_t pad = 0;
  if (text.back() == '=') ++pad;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw ValidationError("short write to '" + path.string() + "'");
}

json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string(what) + ": " + e.what());
  }
}

std::string dump_canonical(const json& j) { return j.dump(2, ' ', false, json::error_handler_t::replace) + "\n"; }

model::ProblemStatement load_statement(const std::filesystem::path& path) {
  auto j = parse_json(read_file(path), path.string());
  // Attachments may reference files instead of embedding them.
  if (auto it = j.find("attachments"); it != j.end() && it->is_array()) {
    for (auto& a : *it) {
      if (a.contains("path") && !a.contains("data")) {
        const auto file = path.parent_path() / a.at("path").get<std::string>();
        a["data"] = base64_encode(read_file(file));
        if (!a.contains("filename")) a["filename"] = file.filename().string();
        a.erase("path");
      }
    }
  }
  try {
    return j.get<model::ProblemStatement>();
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

model::Transcript load_transcript(const std::filesystem::path& path) {
  return parse<model::Transcript>(read_file(path), path.string());
}

model::GradingTemplate load_grading_template(const std::filesystem::path& path) {
  return parse<model::GradingTemplate>(read_file(path), path.string());
}

std::string comparison_form(const model::Transcript& t) {
  auto copy = t;
  copy.created_at.clear();
  for (auto& r : copy.realizations) r.backend_metadata.erase("wall_time_ms");
  return serialize(copy);
}

void persist_transcript(const model::Transcript& t, const std::filesystem::path& dir) {
  write_file(dir / (t.problem_id + ".transcript.json"), serialize(t));
  write_file(dir / (t.problem_id + ".transcript.md"), model::render_transcript(t));
}

}  // namespace agency::io
