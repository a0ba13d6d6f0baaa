#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "saekit/matrix.hpp"

namespace saekit::store {

enum class ShardErrorCode {
  Io,
  BadMagic,
  UnsupportedVersion,
  UnsupportedDtype,
  Truncated,
  TrailingBytes,
  NonMonotoneOffsets,
  NonFinite,
  BadMeta,
  ShapeMismatch,
};

const char* to_string(ShardErrorCode code);

/// Error raised by shard validation and I/O. `field()` names the offending
/// header field or section.
class ShardError : public std::runtime_error {
 public:
  ShardError(ShardErrorCode code, std::string field, const std::string& detail);

  ShardErrorCode code() const { return code_; }
  const std::string& field() const { return field_; }

 private:
  ShardErrorCode code_;
  std::string field_;
};

/// Token activations for a sequence of samples. Sample i owns rows
/// [sample_offsets[i], sample_offsets[i+1]).
struct ActivationShard {
  std::uint32_t d = 0;
  MatrixF rows;
  std::vector<std::uint64_t> sample_offsets{0};
  std::map<std::string, std::string> meta;

  std::size_t num_rows() const { return rows.rows(); }
  std::size_t num_samples() const { return sample_offsets.size() - 1; }
  std::size_t sample_begin(std::size_t i) const { return sample_offsets[i]; }
  std::size_t sample_end(std::size_t i) const { return sample_offsets[i + 1]; }

  bool operator==(const ActivationShard&) const = default;
};

/// Throws ShardError describing the first violated invariant.
void validate(const ActivationShard& shard);

/// Number of bytes write_shard will produce.
std::uint64_t encoded_size(const ActivationShard& shard);

void write_shard(const std::filesystem::path& path, const ActivationShard& shard);
ActivationShard read_shard(const std::filesystem::path& path);

/// Sequences of identical length, BOS-free.
struct TokenSequenceBatch {
  std::size_t seq_len = 0;
  std::vector<std::vector<std::int64_t>> sequences;
};

/// Drops every bos_id, then cuts the stream into seq_len chunks. The
/// trailing partial chunk is discarded.
TokenSequenceBatch chunk_tokens(const std::vector<std::int64_t>& token_ids, std::size_t seq_len,
                                std::optional<std::int64_t> bos_id);

/// Scales every nonzero row to unit L2 norm; zero rows pass through.
ActivationShard normalize_rows(ActivationShard shard);

}  // namespace saekit::store
