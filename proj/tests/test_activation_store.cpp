#include <doctest.h>

#include "saekit/activation_store.hpp"
#include "support.hpp"

using namespace saekit;
using namespace saekit::store;
using saekit::testing::TempDir;

namespace {

ActivationShard two_by_two() {
  ActivationShard s;
  s.d = 2;
  s.rows = MatrixF(2, 2, std::vector<float>{1.0f, 2.0f, 3.0f, 4.0f});
  s.sample_offsets = {0, 1, 2};
  return s;
}

ShardErrorCode read_error(const std::string& path) {
  try {
    read_shard(path);
  } catch (const ShardError& e) {
    return e.code();
  }
  FAIL("read_shard accepted a corrupt file");
  return ShardErrorCode::Io;
}

void put_u64(std::string& bytes, std::size_t at, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) bytes[at + i] = static_cast<char>((v >> (8 * i)) & 0xFF);
}

}  // namespace

TEST_CASE("empty shard is header plus the single offset") {
  TempDir dir("store");
  ActivationShard s;
  s.d = 4;
  s.rows = MatrixF(0, 4);
  write_shard(dir.file("empty.saes"), s);
  // 40 header bytes, no meta, no rows, one u64 offset.
  CHECK(std::filesystem::file_size(dir.file("empty.saes")) == 48);
  CHECK(encoded_size(s) == 48);
  const auto back = read_shard(dir.file("empty.saes"));
  CHECK(back.num_samples() == 0);
  CHECK(back.num_rows() == 0);
}

TEST_CASE("header layout is little-endian and field-exact") {
  TempDir dir("store");
  auto s = two_by_two();
  s.meta = {{"layer", "31"}};
  write_shard(dir.file("s.saes"), s);
  const std::string bytes = saekit::testing::slurp(dir.file("s.saes"));
  REQUIRE(bytes.size() == 40 + 9 + 16 + 24);
  CHECK(bytes.substr(0, 4) == "SAES");
  CHECK(bytes[4] == 1);   // version
  CHECK(bytes[8] == 1);   // dtype f32
  CHECK(bytes[12] == 2);  // d
  CHECK(bytes[16] == 2);  // num_rows
  CHECK(bytes[24] == 2);  // num_samples
  CHECK(bytes[32] == 9);  // meta_len
  CHECK(bytes.substr(40, 9) == "layer=31\n");
  // 1.0f = 0x3F800000
  CHECK(static_cast<unsigned char>(bytes[49 + 3]) == 0x3F);
  CHECK(static_cast<unsigned char>(bytes[49 + 2]) == 0x80);
  CHECK(bytes[65 + 16] == 2);  // last offset
}

TEST_CASE("small shard round trips") {
  TempDir dir("store");
  write_shard(dir.file("s.saes"), two_by_two());
  CHECK(saekit::testing::bitwise_equal(read_shard(dir.file("s.saes")), two_by_two()));
}

TEST_CASE("randomized shards round trip bitwise") {
  TempDir dir("store");
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    auto s = saekit::testing::random_shard(rng, 1 + rng.below(16), 1000, 10);
    s.rows(0, 0) = -0.0f;
    s.rows(1, 0) = std::numeric_limits<float>::denorm_min();
    write_shard(dir.file("r.saes"), s);
    CHECK(saekit::testing::bitwise_equal(read_shard(dir.file("r.saes")), s));
  }
}

TEST_CASE("read errors are distinct and name the field") {
  TempDir dir("store");
  const auto good = dir.file("good.saes");
  write_shard(good, two_by_two());
  const std::string bytes = saekit::testing::slurp(good);

  SUBCASE("bad magic") {
    auto b = bytes;
    b.replace(0, 4, "XXXX");
    saekit::testing::spit(dir.file("x.saes"), b);
    CHECK(read_error(dir.file("x.saes")) == ShardErrorCode::BadMagic);
  }
  SUBCASE("unsupported version") {
    auto b = bytes;
    b[4] = 2;
    saekit::testing::spit(dir.file("x.saes"), b);
    CHECK(read_error(dir.file("x.saes")) == ShardErrorCode::UnsupportedVersion);
  }
  SUBCASE("unsupported dtype") {
    auto b = bytes;
    b[8] = 7;
    saekit::testing::spit(dir.file("x.saes"), b);
    CHECK(read_error(dir.file("x.saes")) == ShardErrorCode::UnsupportedDtype);
  }
  SUBCASE("truncated payload") {
    saekit::testing::spit(dir.file("x.saes"), bytes.substr(0, bytes.size() - 3));
    try {
      read_shard(dir.file("x.saes"));
      FAIL("accepted truncated file");
    } catch (const ShardError& e) {
      CHECK(e.code() == ShardErrorCode::Truncated);
      CHECK(e.field() == "sample_offsets");
    }
  }
  SUBCASE("non-monotone offsets") {
    auto b = bytes;
    // Rewrite the offsets as [0, 2, 1].
    const std::size_t offsets_at = 40 + 16;
    put_u64(b, offsets_at + 8, 2);
    put_u64(b, offsets_at + 16, 1);
    saekit::testing::spit(dir.file("x.saes"), b);
    try {
      read_shard(dir.file("x.saes"));
      FAIL("accepted offsets [0,2,1]");
    } catch (const ShardError& e) {
      CHECK(e.code() == ShardErrorCode::NonMonotoneOffsets);
      CHECK(e.field() == "sample_offsets");
    }
  }
  SUBCASE("trailing bytes") {
    saekit::testing::spit(dir.file("x.saes"), bytes + "zz");
    CHECK(read_error(dir.file("x.saes")) == ShardErrorCode::TrailingBytes);
  }
}

TEST_CASE("invalid shards are rejected before writing") {
  TempDir dir("store");
  auto s = two_by_two();
  s.rows(1, 1) = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(write_shard(dir.file("nan.saes"), s), ShardError);
  CHECK_FALSE(std::filesystem::exists(dir.file("nan.saes")));

  auto t = two_by_two();
  t.sample_offsets = {0, 2, 1};
  CHECK_THROWS_AS(write_shard(dir.file("bad.saes"), t), ShardError);
  CHECK_FALSE(std::filesystem::exists(dir.file("bad.saes")));
}

TEST_CASE("chunk_tokens drops BOS then cuts full chunks") {
  const auto batch = chunk_tokens({1, 5, 6, 1, 7, 8, 9}, 3, 1);
  REQUIRE(batch.sequences.size() == 1);
  CHECK(batch.sequences[0] == std::vector<std::int64_t>{5, 6, 7});

  CHECK(chunk_tokens({}, 4, std::nullopt).sequences.empty());
  CHECK_THROWS(chunk_tokens({1, 2}, 0, std::nullopt));

  Rng rng(3);
  std::vector<std::int64_t> stream(10'003);
  for (auto& t : stream) t = static_cast<std::int64_t>(rng.below(50'000));
  const auto big = chunk_tokens(stream, 100, std::nullopt);
  CHECK(big.sequences.size() == 100);
  CHECK(big.sequences.back().back() == stream[9'999]);
}

TEST_CASE("chunk_tokens count property") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t len = rng.below(300);
    const std::size_t seq_len = 1 + rng.below(17);
    std::vector<std::int64_t> stream(len);
    std::size_t bos = 0;
    for (auto& t : stream) {
      t = static_cast<std::int64_t>(rng.below(6));
      bos += t == 0;
    }
    const auto batch = chunk_tokens(stream, seq_len, 0);
    CHECK(batch.sequences.size() == (len - bos) / seq_len);
    for (const auto& seq : batch.sequences) {
      CHECK(seq.size() == seq_len);
      CHECK(std::find(seq.begin(), seq.end(), 0) == seq.end());
    }
  }
}

TEST_CASE("normalize_rows") {
  ActivationShard s;
  s.d = 2;
  s.rows = MatrixF(2, 2, std::vector<float>{3.0f, 4.0f, 0.0f, 0.0f});
  s.sample_offsets = {0, 2};
  const auto n = normalize_rows(s);
  CHECK(n.rows(0, 0) == doctest::Approx(0.6).epsilon(1e-6));
  CHECK(n.rows(0, 1) == doctest::Approx(0.8).epsilon(1e-6));
  CHECK(n.rows(1, 0) == 0.0f);
  CHECK(n.rows(1, 1) == 0.0f);

  Rng rng(9);
  const auto r = normalize_rows(saekit::testing::random_shard(rng, 24, 500, 5));
  const auto twice = normalize_rows(r);
  for (std::size_t i = 0; i < r.num_rows(); ++i) {
    double sq = 0.0;
    for (float v : r.rows.row(i)) sq += static_cast<double>(v) * v;
    CHECK(std::sqrt(sq) == doctest::Approx(1.0).epsilon(1e-6));
    for (std::size_t j = 0; j < r.d; ++j) CHECK(twice.rows(i, j) == doctest::Approx(r.rows(i, j)).epsilon(1e-6));
  }
}
