// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "qgrad/codec.hpp"
#include "qgrad/errors.hpp"
#include "qgrad/rng.hpp"
#include "test_support.hpp"

using namespace qgrad;

namespace {

QuantizedBucket bucket(std::vector<float> levels, int s, Scheme scheme, std::vector<std::uint16_t> idx) {
  QuantizedBucket b;
  b.levels.levels = std::move(levels);
  b.levels.s = s;
  b.levels.scheme = scheme;
  b.indices = std::move(idx);
  return b;
}

// Two ORQ-3 buckets, d = 4, D = 5. The second bucket has collapsed to a
// single level, so its table repeats that level.
const std::vector<std::uint8_t> kGoldenOrq3 = {
    0x01, 0x01, 0x03, 0x00, 0x04, 0x00, 0x00, 0x00,  // version, scheme, s, d
    0x05, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,  // D
    0x00, 0x00, 0x80, 0xbf, 0x00, 0x00, 0x00, 0x00,  // -1.0f, 0.0f
    0x00, 0x00, 0x80, 0x3f,                          // 1.0f
    0x30, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,  // 0 + 1*3 + 2*9 + 1*27 = 48
    0x00, 0x00, 0x00, 0x3f, 0x00, 0x00, 0x00, 0x3f,  // 0.5f, 0.5f
    0x00, 0x00, 0x00, 0x3f,                          // 0.5f
    0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
};

const std::vector<std::uint8_t> kGoldenDense = {
    0x01, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
    0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0xf0, 0x3f,  // 1.0
    0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0xc0,  // -2.0
};

std::vector<QuantizedBucket> golden_buckets() {
  return {bucket({-1, 0, 1}, 3, Scheme::kOrq, {0, 1, 2, 1}), bucket({0.5f}, 3, Scheme::kOrq, {0})};
}

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), 4 * a.size()) == 0;
}

bool same(const std::vector<QuantizedBucket>& a, const std::vector<QuantizedBucket>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].indices != b[i].indices || !same_bits(a[i].levels.levels, b[i].levels.levels) ||
        a[i].levels.s != b[i].levels.s || a[i].levels.scheme != b[i].levels.scheme) {
      return false;
    }
  }
  return true;
}

std::vector<QuantizedBucket> random_buckets(std::mt19937_64& gen, Scheme scheme, int s, std::size_t d,
                                            std::size_t total) {
  std::vector<QuantizedBucket> out;
  for (std::size_t off = 0; off < total; off += d) {
    const std::size_t len = std::min(d, total - off);
    const std::size_t distinct = 1 + gen() % static_cast<std::size_t>(s);
    std::vector<float> lv;
    float x = static_cast<float>(static_cast<int>(gen() % 2000) - 1000) * 1e-3f;
    for (std::size_t k = 0; k < distinct; ++k) {
      lv.push_back(x);
      x = std::nextafter(x, 1e9f) + static_cast<float>(gen() % 100) * 1e-3f;
    }
    std::vector<std::uint16_t> idx(len);
    for (auto& i : idx) i = static_cast<std::uint16_t>(gen() % distinct);
    out.push_back(bucket(lv, s, scheme, idx));
  }
  return out;
}

}  // namespace

TEST_CASE("golden quantized message") {
  const auto msg = encode(golden_buckets(), 4);
  CHECK(msg.bytes == kGoldenOrq3);
  CHECK(same(decode(WireMessage{kGoldenOrq3}), golden_buckets()));
  CHECK(decode_values(WireMessage{kGoldenOrq3}) == std::vector<double>{-1, 0, 1, 0, 0.5});
}

TEST_CASE("golden dense message") {
  const std::vector<double> v{1.0, -2.0};
  const auto msg = encode_dense(v);
  CHECK(msg.bytes == kGoldenDense);
  CHECK(decode_dense(msg) == v);
  CHECK(ratio_report(msg).theoretical_ratio == 1.0);
}

TEST_CASE("symbols per word is the largest m with s^m <= 2^64") {
  CHECK(symbols_per_word(2) == 64);
  CHECK(symbols_per_word(3) == 40);
  CHECK(symbols_per_word(4) == 32);
  CHECK(symbols_per_word(5) == 27);
  CHECK(symbols_per_word(9) == 20);
  CHECK(symbols_per_word(17) == 15);
  CHECK(symbols_per_word(256) == 8);
  CHECK(symbols_per_word(65535) == 4);
  CHECK_THROWS(symbols_per_word(1));
}

TEST_CASE("roundtrip is exact over random geometries") {
  std::mt19937_64 gen(2024);
  const std::pair<Scheme, int> kinds[] = {{Scheme::kBinGradB, 2},  {Scheme::kBinGradPb, 2}, {Scheme::kScaledSign, 2},
                                          {Scheme::kOrq, 3},       {Scheme::kTernGrad, 3},  {Scheme::kOrq, 5},
                                          {Scheme::kQsgd, 7},      {Scheme::kOrq, 9},       {Scheme::kOrq, 17},
                                          {Scheme::kLinear, 4},    {Scheme::kLinear, 100},  {Scheme::kQsgd, 65535}};
  for (int trial = 0; trial < 400; ++trial) {
    const auto [scheme, s] = kinds[static_cast<std::size_t>(trial) % std::size(kinds)];
    const std::size_t d = 1 + gen() % 300;
    std::size_t total = gen() % 2000;
    if (trial % 10 == 0) total = 0;
    if (trial % 10 == 1) total = 1;
    const auto buckets = random_buckets(gen, scheme, s, d, total);
    const auto msg = encode(buckets, static_cast<std::uint32_t>(d));
    INFO("trial " << trial << " s " << s << " d " << d << " D " << total);
    CHECK(msg.payload_bits() == encoded_bits(static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(d), total));
    const auto back = decode(msg);
    if (total == 0) {
      CHECK(back.empty());
    } else {
      CHECK(same(back, buckets));
      CHECK(encode(back, static_cast<std::uint32_t>(d)).bytes == msg.bytes);
    }
  }
}

TEST_CASE("dense roundtrip keeps every bit") {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(gen() % 500);
    for (auto& x : v) x = std::bit_cast<double>(gen() & 0x7fefffffffffffffULL) * ((gen() & 1) ? 1 : -1);
    CHECK(decode_dense(encode_dense(v)) == v);
  }
}

TEST_CASE("every corrupted byte is detected or changes the payload") {
  const auto msg = encode(golden_buckets(), 4);
  const auto original = decode(msg);
  for (std::size_t at = 0; at < msg.bytes.size(); ++at) {
    for (std::uint8_t mask : {0x01, 0x80, 0xff}) {
      auto bad = msg;
      bad.bytes[at] ^= mask;
      INFO("byte " << at << " mask " << int(mask));
      try {
        const auto back = decode(bad);
        CHECK_FALSE(same(back, original));
      } catch (const FormatError& e) {
        CHECK(e.offset() <= bad.bytes.size());
      } catch (const UnsupportedScheme&) {
      } catch (const std::invalid_argument&) {
        // scheme byte now reads as full precision
      }
    }
  }
}

TEST_CASE("truncation and trailing bytes raise format errors") {
  std::mt19937_64 gen(5);
  const auto buckets = random_buckets(gen, Scheme::kOrq, 5, 37, 200);
  const auto msg = encode(buckets, 37);
  for (std::size_t n = 0; n < msg.bytes.size(); ++n) {
    WireMessage cut{std::vector<std::uint8_t>(msg.bytes.begin(), msg.bytes.begin() + static_cast<long>(n))};
    CHECK_THROWS_AS(decode(cut), FormatError);
  }
  auto longer = msg;
  longer.bytes.push_back(0);
  CHECK_THROWS_AS(decode(longer), FormatError);

  auto huge = msg;
  for (int i = 8; i < 16; ++i) huge.bytes[static_cast<std::size_t>(i)] = 0xff;
  CHECK_THROWS_AS(decode(huge), FormatError);
}

TEST_CASE("header validation") {
  auto bad = kGoldenOrq3;
  bad[0] = 2;
  CHECK_THROWS_AS(read_header(bad), FormatError);
  bad = kGoldenOrq3;
  bad[1] = 42;
  CHECK_THROWS_AS(read_header(bad), UnsupportedScheme);
  bad = kGoldenOrq3;
  bad[4] = 0;
  CHECK_THROWS_AS(read_header(bad), FormatError);
  bad = kGoldenOrq3;
  bad[2] = 1;
  CHECK_THROWS_AS(read_header(bad), FormatError);
}

TEST_CASE("level table checks") {
  auto bad = kGoldenOrq3;
  // first level becomes NaN
  bad[18] = 0xc0;
  bad[19] = 0x7f;
  CHECK_THROWS_AS(decode(WireMessage{bad}), FormatError);
  // digit 2 in the collapsed bucket refers to a padding slot
  bad = kGoldenOrq3;
  bad[48] = 0x02;
  CHECK_THROWS_AS(decode(WireMessage{bad}), FormatError);
}

TEST_CASE("encode rejects inconsistent input") {
  auto b = golden_buckets();
  CHECK_THROWS(encode(b, 3));
  CHECK_THROWS(encode(b, 0));
  auto wrong = b;
  wrong[1].levels.s = 5;
  CHECK_THROWS(encode(wrong, 4));
  wrong = b;
  wrong[0].indices[0] = 3;
  CHECK_THROWS(encode(wrong, 4));
}

TEST_CASE("theoretical ratios") {
  auto ratio_for = [](int s) {
    std::vector<QuantizedBucket> b{bucket({0, 1}, s, s == 2 ? Scheme::kBinGradB : Scheme::kOrq,
                                          std::vector<std::uint16_t>(2048, 0))};
    return ratio_report(encode(b, 2048));
  };
  CHECK(ratio_for(2).theoretical_ratio == 32.0);
  CHECK(ratio_for(3).theoretical_ratio == doctest::Approx(20.1897521).epsilon(1e-8));
  CHECK(ratio_for(5).theoretical_ratio == doctest::Approx(13.7816499).epsilon(1e-8));
  CHECK(ratio_for(9).theoretical_ratio == doctest::Approx(10.0948761).epsilon(1e-8));
  // 65536 bits of float32 over 128 header + 96 table + 52 * 64 index bits
  CHECK(ratio_for(3).achieved_ratio == doctest::Approx(65536.0 / 3552.0));
  CHECK(ratio_for(2).achieved_ratio == doctest::Approx(65536.0 / (128 + 64 + 32 * 64)));
}

TEST_CASE("achieved ratio rises toward the theoretical ratio with bucket size") {
  for (std::uint32_t s : {2u, 3u, 5u, 9u}) {
    double prev = 0.0;
    for (std::uint32_t d : {128u, 512u, 2048u, 8192u, 32768u}) {
      const std::uint64_t total = 1u << 20;
      const double r = 32.0 * static_cast<double>(total) / static_cast<double>(encoded_bits(s, d, total));
      CHECK(r >= prev);
      CHECK(r <= 32.0 / std::log2(static_cast<double>(s)));
      prev = r;
    }
  }
}
