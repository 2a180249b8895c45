#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "abm/domain.hpp"
#include "json.hpp"

namespace abm {

// Line-delimited JSON, one LabeledSession per line. Unknown fields are ignored.
nlohmann::json to_json(const LabeledSession& record);
LabeledSession labeled_session_from_json(const nlohmann::json& j);

std::string to_line(const LabeledSession& record);
LabeledSession parse_line(std::string_view line);

std::vector<LabeledSession> read_records(std::istream& in);
void write_records(std::ostream& out, const std::vector<LabeledSession>& records);

std::vector<LabeledSession> read_corpus_file(const std::filesystem::path& path);
void write_corpus_file(const std::filesystem::path& path,
                       const std::vector<LabeledSession>& records);

}  // namespace abm
