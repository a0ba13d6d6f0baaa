#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace saekit::records {

/// One instruction/response pair. instruction_length counts the Unicode code
/// points of `instruction`.
struct DataRecord {
  std::int64_t id = 0;
  std::string instruction;
  std::string response;
  std::size_t instruction_length = 0;

  static DataRecord make(std::int64_t id, std::string instruction, std::string response);
  bool operator==(const DataRecord&) const = default;
};

enum class LengthMetric { Chars, Tokens };
enum class Scope { Instruction, Both };

const char* to_string(LengthMetric metric);
const char* to_string(Scope scope);
LengthMetric parse_length_metric(const std::string& text);
Scope parse_scope(const std::string& text);

std::size_t char_count(const std::string& utf8);
/// Whitespace-delimited word count; stands in for a tokenizer.
std::size_t token_count(const std::string& text);

/// Length of a record's instruction, or of instruction + response for Scope::Both.
std::size_t text_length(const DataRecord& record, LengthMetric metric, Scope scope);

/// JSON Lines, one object per line with fields id, instruction, response.
std::vector<DataRecord> read_records(const std::filesystem::path& path);
void write_records(const std::filesystem::path& path, const std::vector<DataRecord>& records);

}  // namespace saekit::records
