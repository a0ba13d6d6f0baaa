#include "saekit/activation_store.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "byte_io.hpp"

namespace saekit::store {

namespace {

constexpr char kMagic[4] = {'S', 'A', 'E', 'S'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kDtypeF32 = 1;
constexpr std::uint64_t kHeaderBytes = 40;

std::string encode_meta(const std::map<std::string, std::string>& meta) {
  std::string out;
  for (const auto& [key, value] : meta) {
    out += key;
    out += '=';
    out += value;
    out += '\n';
  }
  return out;
}

std::map<std::string, std::string> decode_meta(std::string_view text) {
  std::map<std::string, std::string> meta;
  while (!text.empty()) {
    const auto newline = text.find('\n');
    if (newline == std::string_view::npos)
      throw ShardError(ShardErrorCode::BadMeta, "meta", "last line is not newline-terminated");
    const auto line = text.substr(0, newline);
    text.remove_prefix(newline + 1);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos || eq == 0)
      throw ShardError(ShardErrorCode::BadMeta, "meta", "line without key=value: " + std::string(line));
    meta.emplace(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
  }
  return meta;
}

}  // namespace

const char* to_string(ShardErrorCode code) {
  switch (code) {
    case ShardErrorCode::Io: return "Io";
    case ShardErrorCode::BadMagic: return "BadMagic";
    case ShardErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ShardErrorCode::UnsupportedDtype: return "UnsupportedDtype";
    case ShardErrorCode::Truncated: return "Truncated";
    case ShardErrorCode::TrailingBytes: return "TrailingBytes";
    case ShardErrorCode::NonMonotoneOffsets: return "NonMonotoneOffsets";
    case ShardErrorCode::NonFinite: return "NonFinite";
    case ShardErrorCode::BadMeta: return "BadMeta";
    case ShardErrorCode::ShapeMismatch: return "ShapeMismatch";
  }
  return "Unknown";
}

ShardError::ShardError(ShardErrorCode code, std::string field, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + " [" + field + "]: " + detail),
      code_(code),
      field_(std::move(field)) {}

void validate(const ActivationShard& shard) {
  if (shard.d == 0) throw ShardError(ShardErrorCode::ShapeMismatch, "d", "d must be positive");
  if (shard.rows.rows() > 0 && shard.rows.cols() != shard.d)
    throw ShardError(ShardErrorCode::ShapeMismatch, "rows",
                     "row width " + std::to_string(shard.rows.cols()) + " != d " + std::to_string(shard.d));
  const auto& offsets = shard.sample_offsets;
  if (offsets.empty() || offsets.front() != 0)
    throw ShardError(ShardErrorCode::NonMonotoneOffsets, "sample_offsets", "must start at 0");
  for (std::size_t i = 1; i < offsets.size(); ++i) {
    if (offsets[i] <= offsets[i - 1])
      throw ShardError(ShardErrorCode::NonMonotoneOffsets, "sample_offsets",
                       "offset " + std::to_string(i) + " (" + std::to_string(offsets[i]) +
                           ") does not exceed its predecessor");
  }
  if (offsets.back() != shard.num_rows())
    throw ShardError(ShardErrorCode::NonMonotoneOffsets, "sample_offsets",
                     "last offset " + std::to_string(offsets.back()) + " != num_rows " +
                         std::to_string(shard.num_rows()));
  for (std::size_t i = 0; i < shard.rows.size(); ++i) {
    if (!std::isfinite(shard.rows.data()[i]))
      throw ShardError(ShardErrorCode::NonFinite, "rows",
                       "entry " + std::to_string(i) + " is not finite");
  }
  for (const auto& [key, value] : shard.meta) {
    if (key.empty() || key.find_first_of("=\n") != std::string::npos ||
        value.find('\n') != std::string::npos)
      throw ShardError(ShardErrorCode::BadMeta, "meta", "unencodable entry '" + key + "'");
  }
}

std::uint64_t encoded_size(const ActivationShard& shard) {
  return kHeaderBytes + encode_meta(shard.meta).size() + shard.rows.size() * 4 +
         shard.sample_offsets.size() * 8;
}

void write_shard(const std::filesystem::path& path, const ActivationShard& shard) {
  validate(shard);
  const std::string meta = encode_meta(shard.meta);

  detail::ByteWriter out;
  out.bytes(kMagic, 4);
  out.u32(kVersion);
  out.u32(kDtypeF32);
  out.u32(shard.d);
  out.u64(shard.num_rows());
  out.u64(shard.num_samples());
  out.u64(meta.size());
  out.bytes(meta.data(), meta.size());
  for (float v : shard.rows.data()) out.f32(v);
  for (std::uint64_t off : shard.sample_offsets) out.u64(off);

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw ShardError(ShardErrorCode::Io, "path", "cannot open " + path.string() + " for writing");
  file.write(out.buffer().data(), static_cast<std::streamsize>(out.buffer().size()));
  if (!file) throw ShardError(ShardErrorCode::Io, "path", "write failed for " + path.string());
}

ActivationShard read_shard(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw ShardError(ShardErrorCode::Io, "path", "cannot open " + path.string());
  const std::string buffer{std::istreambuf_iterator<char>(file), std::istreambuf_iterator<char>()};

  detail::ByteReader in(buffer, [](const char* field, std::size_t need, std::size_t have) {
    throw ShardError(ShardErrorCode::Truncated, field,
                     "need " + std::to_string(need) + " bytes, " + std::to_string(have) + " remain");
  });

  if (buffer.size() < 4 || std::memcmp(buffer.data(), kMagic, 4) != 0)
    throw ShardError(ShardErrorCode::BadMagic, "magic", "expected \"SAES\"");
  in.skip("magic", 4);
  if (const auto version = in.u32("version"); version != kVersion)
    throw ShardError(ShardErrorCode::UnsupportedVersion, "version", "got " + std::to_string(version));
  if (const auto dtype = in.u32("dtype"); dtype != kDtypeF32)
    throw ShardError(ShardErrorCode::UnsupportedDtype, "dtype", "got " + std::to_string(dtype));

  ActivationShard shard;
  shard.d = in.u32("d");
  if (shard.d == 0) throw ShardError(ShardErrorCode::ShapeMismatch, "d", "d must be positive");
  const std::uint64_t num_rows = in.u64("num_rows");
  const std::uint64_t num_samples = in.u64("num_samples");
  const std::uint64_t meta_len = in.u64("meta_len");

  shard.meta = decode_meta(in.view("meta", meta_len));

  if (num_rows > in.remaining() / 4 / shard.d)
    throw ShardError(ShardErrorCode::Truncated, "rows",
                     std::to_string(num_rows) + " rows of width " + std::to_string(shard.d) +
                         " exceed the remaining payload");
  std::vector<float> values(num_rows * shard.d);
  for (auto& v : values) v = in.f32("rows");
  shard.rows = MatrixF(num_rows, shard.d, std::move(values));

  if (num_samples >= in.remaining() / 8)
    throw ShardError(ShardErrorCode::Truncated, "sample_offsets",
                     std::to_string(num_samples + 1) + " offsets exceed the remaining payload");
  shard.sample_offsets.resize(num_samples + 1);
  for (auto& off : shard.sample_offsets) off = in.u64("sample_offsets");

  if (in.remaining() != 0)
    throw ShardError(ShardErrorCode::TrailingBytes, "eof",
                     std::to_string(in.remaining()) + " unexpected trailing bytes");

  validate(shard);
  return shard;
}

TokenSequenceBatch chunk_tokens(const std::vector<std::int64_t>& token_ids, std::size_t seq_len,
                                std::optional<std::int64_t> bos_id) {
  if (seq_len == 0) throw std::invalid_argument("seq_len must be at least 1");
  TokenSequenceBatch batch;
  batch.seq_len = seq_len;
  std::vector<std::int64_t> current;
  current.reserve(seq_len);
  for (std::int64_t tok : token_ids) {
    if (bos_id && tok == *bos_id) continue;
    current.push_back(tok);
    if (current.size() == seq_len) {
      batch.sequences.push_back(std::move(current));
      current = {};
      current.reserve(seq_len);
    }
  }
  return batch;
}

ActivationShard normalize_rows(ActivationShard shard) {
  for (std::size_t r = 0; r < shard.rows.rows(); ++r) {
    auto row = shard.rows.row(r);
    double sq = 0.0;
    for (float v : row) sq += static_cast<double>(v) * v;
    if (sq == 0.0) continue;
    const double inv = 1.0 / std::sqrt(sq);
    for (float& v : row) v = static_cast<float>(v * inv);
  }
  return shard;
}

}  // namespace saekit::store
