#include "saekit/records.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace saekit::records {

DataRecord DataRecord::make(std::int64_t id, std::string instruction, std::string response) {
  DataRecord r;
  r.id = id;
  r.instruction_length = char_count(instruction);
  r.instruction = std::move(instruction);
  r.response = std::move(response);
  return r;
}

const char* to_string(LengthMetric metric) { return metric == LengthMetric::Chars ? "chars" : "tokens"; }
const char* to_string(Scope scope) { return scope == Scope::Instruction ? "instruction" : "both"; }

LengthMetric parse_length_metric(const std::string& text) {
  if (text == "chars") return LengthMetric::Chars;
  if (text == "tokens") return LengthMetric::Tokens;
  throw std::invalid_argument("unknown length metric '" + text + "' (chars|tokens)");
}

Scope parse_scope(const std::string& text) {
  if (text == "instruction") return Scope::Instruction;
  if (text == "both") return Scope::Both;
  throw std::invalid_argument("unknown scope '" + text + "' (instruction|both)");
}

std::size_t char_count(const std::string& utf8) {
  std::size_t count = 0;
  for (unsigned char c : utf8)
    if ((c & 0xC0u) != 0x80u) ++count;
  return count;
}

std::size_t token_count(const std::string& text) {
  std::size_t count = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    if (!space && !in_word) ++count;
    in_word = !space;
  }
  return count;
}

std::size_t text_length(const DataRecord& record, LengthMetric metric, Scope scope) {
  const auto measure = [&](const std::string& s) {
    return metric == LengthMetric::Chars ? char_count(s) : token_count(s);
  };
  std::size_t len = measure(record.instruction);
  if (scope == Scope::Both) len += measure(record.response);
  return len;
}

std::vector<DataRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open records file " + path.string());
  std::vector<DataRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto obj = nlohmann::json::parse(line);
      out.push_back(DataRecord::make(obj.at("id").get<std::int64_t>(), obj.at("instruction").get<std::string>(),
                                     obj.value("response", std::string{})));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_records(const std::filesystem::path& path, const std::vector<DataRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (const auto& r : records) {
    nlohmann::ordered_json obj;
    obj["id"] = r.id;
    obj["instruction"] = r.instruction;
    obj["response"] = r.response;
    out << obj.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace saekit::records
