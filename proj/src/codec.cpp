// SPDX-License-Identifier: Apache-2.0
#include "qgrad/codec.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "qgrad/errors.hpp"
#include "qgrad/tensorcore.hpp"

namespace qgrad {
namespace {

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}

  template <typename T>
  void put(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }
  void put_f32(float f) { put(std::bit_cast<std::uint32_t>(f)); }
  void put_f64(double f) { put(std::bit_cast<std::uint64_t>(f)); }

 private:
  std::vector<std::uint8_t>& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  template <typename T>
  T get() {
    if (in_.size() - pos_ < sizeof(T)) {
      throw FormatError("truncated message", pos_);
    }
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<T>(in_[pos_ + i]) << (8 * i));
    }
    pos_ += sizeof(T);
    return v;
  }
  float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }

  std::size_t pos() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void write_header(Writer& w, const WireHeader& h) {
  w.put(h.version);
  w.put(static_cast<std::uint8_t>(h.scheme));
  w.put(h.levels);
  w.put(h.bucket_size);
  w.put(h.elements);
}

}  // namespace

int symbols_per_word(std::uint32_t s) {
  if (s < 2) throw std::invalid_argument("symbols_per_word: s must be >= 2");
  const unsigned __int128 limit = static_cast<unsigned __int128>(1) << 64;
  unsigned __int128 p = 1;
  int m = 0;
  while (p * s <= limit) {
    p *= s;
    ++m;
  }
  return m;
}

std::uint64_t encoded_bits(std::uint32_t s, std::uint32_t d, std::uint64_t total) {
  const std::uint64_t m = static_cast<std::uint64_t>(symbols_per_word(s));
  std::uint64_t bits = 8 * kHeaderBytes;
  if (total == 0) return bits;
  const std::uint64_t full = total / d;
  const std::uint64_t rest = total % d;
  const std::uint64_t words_full = (d + m - 1) / m;
  bits += full * (32ULL * s + 64ULL * words_full);
  if (rest != 0) bits += 32ULL * s + 64ULL * ((rest + m - 1) / m);
  return bits;
}

WireMessage encode(std::span<const QuantizedBucket> buckets, std::uint32_t d) {
  if (d == 0) throw std::invalid_argument("encode: bucket size must be >= 1");
  WireHeader h;
  h.bucket_size = d;
  std::uint64_t total = 0;
  for (const auto& b : buckets) total += b.size();
  h.elements = total;
  h.levels = 3;
  if (!buckets.empty()) {
    h.scheme = buckets.front().levels.scheme;
    const int s = buckets.front().levels.s;
    if (h.scheme == Scheme::kFullPrecision) {
      throw std::invalid_argument("encode: full-precision data goes through encode_dense");
    }
    if (s < 2 || s > 65535) throw std::invalid_argument("encode: nominal s out of range");
    h.levels = static_cast<std::uint16_t>(s);
  }
  const std::size_t n_buckets = bucket_count(total, d);
  if (n_buckets != buckets.size()) {
    throw std::invalid_argument("encode: bucket count does not match the tiling of D by d");
  }

  WireMessage msg;
  msg.bytes.reserve(encoded_bits(std::max<std::uint16_t>(h.levels, 2), d, total) / 8);
  Writer w(msg.bytes);
  write_header(w, h);
  if (buckets.empty()) return msg;

  const std::uint32_t s = h.levels;
  const int m = symbols_per_word(s);
  for (std::size_t bi = 0; bi < buckets.size(); ++bi) {
    const auto& b = buckets[bi];
    if (b.levels.scheme != h.scheme || b.levels.s != static_cast<int>(s)) {
      throw std::invalid_argument("encode: bucket " + std::to_string(bi) +
                                  " has a different scheme or level count");
    }
    if (b.size() != bucket_length(total, d, bi)) {
      throw std::invalid_argument("encode: bucket " + std::to_string(bi) +
                                  " length does not match the tiling");
    }
    const auto& lv = b.levels.levels;
    if (lv.empty() || lv.size() > s) {
      throw std::invalid_argument("encode: bucket " + std::to_string(bi) + " has an invalid level table");
    }
    for (std::uint32_t k = 0; k < s; ++k) w.put_f32(lv[std::min<std::size_t>(k, lv.size() - 1)]);

    const auto& idx = b.indices;
    for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(m)) {
      const std::size_t end = std::min(idx.size(), start + static_cast<std::size_t>(m));
      std::uint64_t word = 0;
      for (std::size_t j = end; j-- > start;) {
        if (idx[j] >= lv.size()) {
          throw std::invalid_argument("encode: index out of range in bucket " + std::to_string(bi));
        }
        word = word * s + idx[j];
      }
      w.put(word);
    }
  }
  return msg;
}

WireMessage encode_dense(std::span<const double> values) {
  WireHeader h;
  h.scheme = Scheme::kFullPrecision;
  h.levels = 0;
  h.bucket_size = values.empty() ? 1 : static_cast<std::uint32_t>(std::min<std::size_t>(values.size(), 0xffffffffULL));
  h.elements = values.size();
  WireMessage msg;
  msg.bytes.reserve(kHeaderBytes + 8 * values.size());
  Writer w(msg.bytes);
  write_header(w, h);
  for (double v : values) w.put_f64(v);
  return msg;
}

WireHeader read_header(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  WireHeader h;
  h.version = r.get<std::uint8_t>();
  if (h.version != kWireVersion) {
    throw FormatError("unsupported format version " + std::to_string(h.version), 0);
  }
  const auto scheme_id = r.get<std::uint8_t>();
  if (scheme_id > kMaxSchemeId) {
    throw UnsupportedScheme("unknown scheme id " + std::to_string(scheme_id));
  }
  h.scheme = static_cast<Scheme>(scheme_id);
  h.levels = r.get<std::uint16_t>();
  h.bucket_size = r.get<std::uint32_t>();
  h.elements = r.get<std::uint64_t>();
  if (h.bucket_size == 0) throw FormatError("bucket size is zero", 4);
  if (h.scheme == Scheme::kFullPrecision) {
    if (h.levels != 0) throw FormatError("full-precision message with nonzero level count", 2);
  } else if (h.levels < 2) {
    throw FormatError("level count below 2", 2);
  }
  return h;
}

std::vector<QuantizedBucket> decode(const WireMessage& msg) {
  const WireHeader h = read_header(msg.bytes);
  if (h.scheme == Scheme::kFullPrecision) {
    throw std::invalid_argument("decode: full-precision message, use decode_dense");
  }
  const std::uint32_t s = h.levels;
  // Every element costs at least one bit, which bounds D before any
  // size arithmetic.
  if (h.elements > msg.payload_bits()) throw FormatError("truncated message", msg.bytes.size());
  const std::uint64_t expected_bits = encoded_bits(s, h.bucket_size, h.elements);
  if (expected_bits != msg.payload_bits()) {
    const std::size_t at = std::min<std::size_t>(msg.bytes.size(), expected_bits / 8);
    throw FormatError(msg.payload_bits() < expected_bits ? "truncated message" : "trailing bytes", at);
  }

  Reader r(msg.bytes);
  for (std::size_t i = 0; i < kHeaderBytes; ++i) r.get<std::uint8_t>();

  const int m = symbols_per_word(s);
  const std::size_t n = bucket_count(static_cast<std::size_t>(h.elements), h.bucket_size);
  std::vector<QuantizedBucket> out(n);
  for (std::size_t bi = 0; bi < n; ++bi) {
    auto& b = out[bi];
    b.levels.s = static_cast<int>(s);
    b.levels.scheme = h.scheme;
    const std::size_t table_at = r.pos();
    std::vector<float> table(s);
    for (auto& f : table) f = r.get_f32();
    for (std::uint32_t k = 0; k < s; ++k) {
      if (!std::isfinite(table[k])) throw FormatError("non-finite level", table_at + 4 * k);
      if (k > 0 && table[k] < table[k - 1]) throw FormatError("level table not sorted", table_at + 4 * k);
    }
    // Trailing repeats are padding; real levels are strictly increasing.
    std::size_t distinct = 1;
    while (distinct < s && table[distinct] > table[distinct - 1]) ++distinct;
    for (std::size_t k = distinct; k < s; ++k) {
      if (table[k] != table[distinct - 1]) throw FormatError("duplicate level inside table", table_at + 4 * k);
    }
    table.resize(distinct);
    b.levels.levels = std::move(table);

    const std::size_t len = bucket_length(static_cast<std::size_t>(h.elements), h.bucket_size, bi);
    b.indices.resize(len);
    for (std::size_t start = 0; start < len; start += static_cast<std::size_t>(m)) {
      const std::size_t word_at = r.pos();
      std::uint64_t word = r.get<std::uint64_t>();
      const std::size_t end = std::min(len, start + static_cast<std::size_t>(m));
      for (std::size_t j = start; j < end; ++j) {
        const std::uint64_t digit = word % s;
        word /= s;
        if (digit >= distinct) throw FormatError("level index out of range", word_at);
        b.indices[j] = static_cast<std::uint16_t>(digit);
      }
      if (word != 0) throw FormatError("nonzero padding digits in packed word", word_at);
    }
  }
  return out;
}

std::vector<double> decode_dense(const WireMessage& msg) {
  const WireHeader h = read_header(msg.bytes);
  if (h.scheme != Scheme::kFullPrecision) {
    throw std::invalid_argument("decode_dense: quantized message, use decode");
  }
  Reader r(msg.bytes);
  for (std::size_t i = 0; i < kHeaderBytes; ++i) r.get<std::uint8_t>();
  if (h.elements > r.remaining() || r.remaining() != 8 * h.elements) {
    throw FormatError(r.remaining() < 8 * h.elements ? "truncated message" : "trailing bytes",
                      kHeaderBytes + std::min<std::size_t>(r.remaining(), 8 * h.elements));
  }
  std::vector<double> out(static_cast<std::size_t>(h.elements));
  for (auto& v : out) v = r.get_f64();
  return out;
}

std::vector<double> decode_values(const WireMessage& msg) {
  const WireHeader h = read_header(msg.bytes);
  if (h.scheme == Scheme::kFullPrecision) return decode_dense(msg);
  const auto buckets = decode(msg);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(h.elements));
  for (const auto& b : buckets) {
    for (auto i : b.indices) out.push_back(b.levels.levels[i]);
  }
  return out;
}

RatioReport ratio_report(const WireMessage& msg) {
  const WireHeader h = read_header(msg.bytes);
  if (h.elements == 0) throw std::invalid_argument("ratio_report: empty gradient");
  RatioReport rep;
  const double bits = static_cast<double>(msg.payload_bits());
  const double n = static_cast<double>(h.elements);
  rep.achieved_ratio = 32.0 * n / bits;
  rep.bits_per_element = bits / n;
  rep.theoretical_ratio = h.scheme == Scheme::kFullPrecision ? 1.0 : 32.0 / std::log2(static_cast<double>(h.levels));
  return rep;
}

}  // namespace qgrad
