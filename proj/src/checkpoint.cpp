#include "saekit/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "byte_io.hpp"

namespace saekit::sae {

namespace {

constexpr char kMagic[4] = {'S', 'A', 'E', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_block(detail::ByteWriter& out, const std::vector<double>& values) {
  out.u64(values.size());
  for (double v : values) out.f32(static_cast<float>(v));
}

std::vector<double> get_block(detail::ByteReader& in, const char* field, std::size_t expected) {
  const std::uint64_t count = in.u64(field);
  if (count != expected)
    throw CheckpointError(std::string("checkpoint block ") + field + " holds " + std::to_string(count) +
                          " values, expected " + std::to_string(expected));
  std::vector<double> values(count);
  for (auto& v : values) {
    const float f = in.f32(field);
    if (!std::isfinite(f)) throw CheckpointError(std::string("non-finite value in ") + field);
    v = f;
  }
  return values;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const SaeParams& params) {
  check_params(params);
  detail::ByteWriter out;
  out.bytes(kMagic, 4);
  out.u32(kVersion);
  out.u32(static_cast<std::uint32_t>(params.variant));
  out.u32(static_cast<std::uint32_t>(params.n));
  out.u32(static_cast<std::uint32_t>(params.d));
  out.u32(static_cast<std::uint32_t>(params.k));
  put_block(out, params.w_enc.data());
  put_block(out, params.b_enc);
  put_block(out, params.w_dec.data());
  put_block(out, params.b_pre);

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw CheckpointError("cannot open " + path.string() + " for writing");
  file.write(out.buffer().data(), static_cast<std::streamsize>(out.buffer().size()));
  if (!file) throw CheckpointError("write failed for " + path.string());
}

SaeParams read_checkpoint(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::string buffer{std::istreambuf_iterator<char>(file), std::istreambuf_iterator<char>()};
  if (buffer.size() < 4 || std::memcmp(buffer.data(), kMagic, 4) != 0)
    throw CheckpointError("bad magic in " + path.string() + " (expected \"SAEP\")");

  detail::ByteReader in(buffer, [](const char* field, std::size_t need, std::size_t have) {
    throw CheckpointError(std::string("truncated checkpoint at ") + field + ": need " +
                          std::to_string(need) + " bytes, " + std::to_string(have) + " remain");
  });
  in.skip("magic", 4);
  if (const auto version = in.u32("version"); version != kVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto variant = in.u32("variant");
  if (variant > 1) throw CheckpointError("unknown SAE variant " + std::to_string(variant));

  SaeParams p;
  p.variant = static_cast<Variant>(variant);
  p.n = in.u32("n");
  p.d = in.u32("d");
  p.k = in.u32("k");
  p.w_enc = MatrixD(p.n, p.d, get_block(in, "w_enc", p.n * p.d));
  p.b_enc = get_block(in, "b_enc", p.variant == Variant::Relu ? p.n : 0);
  p.w_dec = MatrixD(p.d, p.n, get_block(in, "w_dec", p.d * p.n));
  p.b_pre = get_block(in, "b_pre", p.d);
  if (in.remaining() != 0) throw CheckpointError("trailing bytes after checkpoint payload");
  check_params(p);
  return p;
}

SaeParams round_to_f32(SaeParams params) {
  const auto narrow = [](std::vector<double>& values) {
    for (double& v : values) v = static_cast<float>(v);
  };
  narrow(params.w_enc.data());
  narrow(params.b_enc);
  narrow(params.w_dec.data());
  narrow(params.b_pre);
  return params;
}

}  // namespace saekit::sae
