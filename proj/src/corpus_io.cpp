#include "abm/corpus_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "abm/errors.hpp"

namespace abm {

using nlohmann::json;

namespace {

template <typename V>
V field(const json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) throw ParseError(name, "missing field");
  try {
    return j.at(name).get<V>();
  } catch (const json::exception& e) {
    throw ParseError(name, e.what());
  }
}

}  // namespace

json to_json(const LabeledSession& r) {
  json turns = json::array();
  for (const Turn& t : r.session.turns) {
    json jt;
    jt["q_o"] = t.bundle.original;
    jt["q_n"] = t.bundle.nbest;
    jt["q_f"] = t.bundle.final_query;
    jt["domain"] = t.nlu.domain;
    jt["intent"] = t.nlu.intent;
    jt["slots"] = t.nlu.slots;
    jt["title"] = t.response.title;
    if (!t.response.voice_response.empty()) jt["voice"] = t.response.voice_response;
    jt["interval_s"] = t.interval_s;
    jt["action"] = std::string(to_string(t.action));
    turns.push_back(std::move(jt));
  }
  json j;
  j["session_id"] = r.session.session_id;
  j["turns"] = std::move(turns);
  j["label"] = r.label;
  j["domain_intent"] = r.domain_intent;
  j["slices"] = {{"error_type", std::string(to_string(r.slices.error_type))},
                 {"rare", r.slices.rare},
                 {"domain", r.slices.domain}};
  j["ground_truth"] = r.ground_truth ? json(*r.ground_truth) : json(nullptr);
  return j;
}

LabeledSession labeled_session_from_json(const json& j) {
  LabeledSession r;
  r.session.session_id = field<std::string>(j, "session_id");
  const json& turns = j.contains("turns") ? j.at("turns") : throw ParseError("turns", "missing field");
  if (!turns.is_array() || turns.empty()) throw ParseError("turns", "expected non-empty array");
  for (const json& jt : turns) {
    Turn t;
    t.bundle.original = field<TokenSeq>(jt, "q_o");
    t.bundle.nbest = field<std::vector<TokenSeq>>(jt, "q_n");
    t.bundle.final_query = field<TokenSeq>(jt, "q_f");
    t.nlu.domain = field<int>(jt, "domain");
    t.nlu.intent = field<int>(jt, "intent");
    t.nlu.slots = field<std::vector<int>>(jt, "slots");
    t.response.title = field<TokenSeq>(jt, "title");
    if (jt.contains("voice")) t.response.voice_response = field<TokenSeq>(jt, "voice");
    t.interval_s = field<double>(jt, "interval_s");
    t.action = parse_user_action(field<std::string>(jt, "action"));
    r.session.turns.push_back(std::move(t));
  }
  r.session.current_index = r.session.turns.size() - 1;
  r.label = field<int>(j, "label");
  if (r.label != 0 && r.label != 1) throw ParseError("label", "must be 0 or 1");
  r.domain_intent = field<int>(j, "domain_intent");
  const json& slices = j.contains("slices") ? j.at("slices") : throw ParseError("slices", "missing field");
  r.slices.error_type = parse_error_type(field<std::string>(slices, "error_type"));
  r.slices.rare = field<bool>(slices, "rare");
  r.slices.domain = slices.contains("domain") ? field<int>(slices, "domain") : r.session.turns.back().nlu.domain;
  if (j.contains("ground_truth") && !j.at("ground_truth").is_null()) {
    r.ground_truth = field<int>(j, "ground_truth");
    if (*r.ground_truth != 0 && *r.ground_truth != 1)
      throw ParseError("ground_truth", "must be 0, 1 or null");
  }
  return r;
}

std::string to_line(const LabeledSession& record) { return to_json(record).dump(); }

LabeledSession parse_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError("record", e.what());
  }
  return labeled_session_from_json(j);
}

std::vector<LabeledSession> read_records(std::istream& in) {
  std::vector<LabeledSession> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_line(line));
    } catch (const ParseError& e) {
      throw ParseError(e.field(), "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_records(std::ostream& out, const std::vector<LabeledSession>& records) {
  for (const auto& r : records) out << to_line(r) << '\n';
}

std::vector<LabeledSession> read_corpus_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("path", "cannot open " + path.string());
  return read_records(in);
}

void write_corpus_file(const std::filesystem::path& path,
                       const std::vector<LabeledSession>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  write_records(out, records);
}

}  // namespace abm
