#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "saekit/sae.hpp"

namespace saekit::sae {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// "SAEP" checkpoint: magic, version, variant, n, d, k as u32, then w_enc,
/// b_enc, w_dec, b_pre as f32 blocks, each prefixed by its u64 element count.
/// Parameters are narrowed to f32 on write.
void write_checkpoint(const std::filesystem::path& path, const SaeParams& params);
SaeParams read_checkpoint(const std::filesystem::path& path);

/// Narrows every parameter to f32 and back, i.e. what a write/read cycle yields.
SaeParams round_to_f32(SaeParams params);

}  // namespace saekit::sae
