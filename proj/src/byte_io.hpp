#pragma once

// Little-endian encoding helpers shared by the shard and checkpoint formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <functional>
#include <string>
#include <string_view>

namespace saekit::detail {

class ByteWriter {
 public:
  void bytes(const char* data, std::size_t len) { buf_.append(data, len); }

  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }

  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }

  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  const std::string& buffer() const { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  // on_short(field, needed, remaining) must throw.
  using ShortReadHandler = std::function<void(const char*, std::size_t, std::size_t)>;

  ByteReader(std::string_view data, ShortReadHandler on_short)
      : data_(data), on_short_(std::move(on_short)) {}

  std::size_t remaining() const { return data_.size() - pos_; }

  void skip(const char* field, std::size_t len) { take(field, len); }

  std::string_view view(const char* field, std::uint64_t len) {
    if (len > remaining()) on_short_(field, static_cast<std::size_t>(len), remaining());
    return take(field, static_cast<std::size_t>(len));
  }

  std::uint32_t u32(const char* field) {
    const auto b = take(field, 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[i]);
    return v;
  }

  std::uint64_t u64(const char* field) {
    const auto b = take(field, 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[i]);
    return v;
  }

  float f32(const char* field) { return std::bit_cast<float>(u32(field)); }

 private:
  std::string_view take(const char* field, std::size_t len) {
    if (len > remaining()) on_short_(field, len, remaining());
    const auto out = data_.substr(pos_, len);
    pos_ += len;
    return out;
  }

  std::string_view data_;
  std::size_t pos_ = 0;
  ShortReadHandler on_short_;
};

}  // namespace saekit::detail
