// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <limits>
#include <random>

#include "qgrad/tensorcore.hpp"

using namespace qgrad;

TEST_CASE("bucket views tile the buffer exactly once") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t total = gen() % 5000;
    const std::size_t d = 1 + gen() % 700;
    GradientBuffer buf(std::vector<float>(total, 1.0f));
    const auto views = bucketize(buf, d);
    REQUIRE(views.size() == bucket_count(total, d));
    std::vector<int> hits(total, 0);
    std::size_t expected_offset = 0;
    for (std::size_t i = 0; i < views.size(); ++i) {
      CHECK(views[i].offset == expected_offset);
      CHECK(views[i].len == bucket_length(total, d, i));
      CHECK(views[i].len >= 1);
      CHECK(views[i].len <= d);
      if (i + 1 < views.size()) CHECK(views[i].len == d);
      for (std::size_t j = 0; j < views[i].len; ++j) ++hits[views[i].offset + j];
      expected_offset += views[i].len;
    }
    CHECK(expected_offset == total);
    for (int h : hits) REQUIRE(h == 1);
  }
}

TEST_CASE("short final bucket is kept rather than padded") {
  GradientBuffer buf(std::vector<float>{1, 2, 3, 4, 5});
  const auto views = bucketize(buf, 2);
  REQUIRE(views.size() == 3);
  CHECK(views[2].len == 1);
  CHECK(views[2].values()[0] == 5.0f);
}

TEST_CASE("bucketize rejects d = 0 and the buffer rejects non-finite values") {
  GradientBuffer buf(std::vector<float>{1});
  CHECK_THROWS_AS(bucketize(buf, 0), std::invalid_argument);
  CHECK_THROWS(GradientBuffer(std::vector<float>{1, std::numeric_limits<float>::quiet_NaN()}));
  CHECK_THROWS(GradientBuffer(std::vector<float>{std::numeric_limits<float>::infinity()}));
  CHECK(bucketize(GradientBuffer{}, 4).empty());
}

TEST_CASE("stats on a small hand-checked bucket") {
  const std::vector<float> v{-1, 2, 3, -4};
  const auto st = stats(v);
  CHECK(st.min == -4.0);
  CHECK(st.max == 3.0);
  CHECK(st.mean == doctest::Approx(0.0));
  CHECK(st.l1_norm == 10.0);
  CHECK(st.count == 4);
  // population variance (1 + 4 + 9 + 16) / 4
  CHECK(st.std == doctest::Approx(std::sqrt(7.5)));
  CHECK(stats(std::vector<float>{5}).std == 0.0);
  CHECK_THROWS(stats(std::vector<float>{}));
}

TEST_CASE("stats are bitwise deterministic") {
  std::mt19937_64 gen(3);
  std::normal_distribution<float> nd(0.0f, 1.0f);
  std::vector<float> v(100000);
  for (auto& x : v) x = nd(gen);
  const auto a = stats(v);
  const auto b = stats(v);
  CHECK(std::memcmp(&a, &b, sizeof a) == 0);
}

TEST_CASE("clipping caps magnitudes at c times sigma") {
  std::mt19937_64 gen(5);
  std::student_t_distribution<double> td(2.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<float> v(1 + gen() % 3000);
    for (auto& x : v) x = static_cast<float>(td(gen));
    const double c = 0.5 + static_cast<double>(gen() % 40) / 10.0;
    const double sigma = stats(v).std;
    const auto out = clip(v, c);
    REQUIRE(out.size() == v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      CHECK(std::abs(static_cast<double>(out[i])) <= c * sigma * (1 + 1e-7));
      const bool sign_kept = std::signbit(out[i]) == std::signbit(v[i]) || out[i] == 0.0f;
      CHECK(sign_kept);
      if (std::abs(v[i]) <= c * sigma * (1 - 1e-7)) CHECK(out[i] == v[i]);
    }
  }
}

TEST_CASE("clipping a constant bucket zeroes it and c <= 0 is rejected") {
  const std::vector<float> v(10, 3.0f);
  for (float x : clip(v, 2.5)) CHECK(x == 0.0f);
  CHECK_THROWS_AS(clip(v, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(clip(v, -1.0), std::invalid_argument);
}
