#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>

#include "freenoise/noise_schedule.hpp"
#include "freenoise/rng.hpp"

using namespace freenoise;

namespace {

bool is_permutation_of(const std::vector<int>& got, std::set<int> expect) {
  if (got.size() != expect.size()) return false;
  for (int v : got) {
    if (!expect.erase(v)) return false;
  }
  return true;
}

std::vector<int> slice(const std::vector<int>& v, int begin, int end) {
  return {v.begin() + begin, v.begin() + end};
}

}  // namespace

TEST_CASE("paper-shaped plan: identity head, per-unit blocks") {
  const ShufflePlan plan = build_shuffle_plan(16, 4, 64, 123);
  for (int i = 0; i < 16; ++i) CHECK(plan.mapping[i] == i);
  CHECK(is_permutation_of(slice(plan.mapping, 16, 20), {0, 1, 2, 3}));
  CHECK(is_permutation_of(slice(plan.mapping, 20, 24), {4, 5, 6, 7}));
  CHECK(is_permutation_of(slice(plan.mapping, 24, 28), {8, 9, 10, 11}));
}

TEST_CASE("total == n_train yields the identity mapping") {
  const ShufflePlan plan = build_shuffle_plan(16, 4, 16, 99);
  for (int i = 0; i < 16; ++i) CHECK(plan.mapping[i] == i);
}

TEST_CASE("small plan: exhaustive window multisets") {
  const ShufflePlan plan = build_shuffle_plan(4, 2, 8, 7);
  CHECK(is_permutation_of(slice(plan.mapping, 4, 6), {0, 1}));
  CHECK(is_permutation_of(slice(plan.mapping, 6, 8), {2, 3}));
  for (int start = 0; start + 4 <= 8; start += 2) {
    CHECK(is_permutation_of(slice(plan.mapping, start, start + 4), {0, 1, 2, 3}));
  }
  CHECK(verify_window_coverage(plan, 4, 2));
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(build_shuffle_plan(16, 3, 64, 0), ConfigError);   // 3 does not divide 16
  CHECK_THROWS_AS(build_shuffle_plan(16, 4, 12, 0), ConfigError);   // total < n_train
}

TEST_CASE("partial trailing unit shuffles its truncated block") {
  const ShufflePlan plan = build_shuffle_plan(16, 4, 66, 5);
  REQUIRE(static_cast<int>(plan.mapping.size()) == 66);
  // frames 64,65 belong to unit 12, whose block starts at (12*4) mod 16 = 0
  CHECK(is_permutation_of(slice(plan.mapping, 64, 66), {0, 1}));
}

TEST_CASE("determinism and suffix extension") {
  const ShufflePlan a = build_shuffle_plan(16, 4, 64, 11);
  const ShufflePlan b = build_shuffle_plan(16, 4, 64, 11);
  CHECK(a.mapping == b.mapping);
  // growing the plan only appends; earlier units keep their shuffles
  const ShufflePlan longer = build_shuffle_plan(16, 4, 128, 11);
  CHECK(std::equal(a.mapping.begin(), a.mapping.end(), longer.mapping.begin()));
}

TEST_CASE("coverage sweep and frequency balance") {
  for (int n_train : {4, 8, 16}) {
    for (int unit : {2, 4, 8}) {
      if (n_train % unit != 0) continue;
      for (int total = n_train; total <= 128; total += unit) {
        for (uint64_t seed = 0; seed < 20; ++seed) {
          const ShufflePlan plan = build_shuffle_plan(n_train, unit, total, seed);
          CHECK(verify_window_coverage(plan, n_train, unit));
          std::map<int, int> freq;
          for (int v : plan.mapping) ++freq[v];
          const int lo = total / n_train, hi = (total + n_train - 1) / n_train;
          for (const auto& [idx, count] : freq) {
            CHECK(count >= lo);
            CHECK(count <= hi);
          }
        }
      }
    }
  }
}

TEST_CASE("materialize: identity plan copies base bitwise") {
  const BaseNoise base = make_base_noise(2, 4, 3, 3, 42, 1);
  const ShufflePlan plan = build_shuffle_plan(4, 2, 4, 42);
  const Array out = materialize_noise(plan, base);
  CHECK(bitwise_equal(out, base.frames));
}

TEST_CASE("materialize: every frame is a bitwise copy of its mapped base frame") {
  const BaseNoise base = make_base_noise(3, 16, 4, 4, 7, 1);
  const ShufflePlan plan = build_shuffle_plan(16, 4, 64, 7);
  const Array out = materialize_noise(plan, base);
  REQUIRE(out.extent(1) == 64);
  for (int i : {17, 23, 40, 63}) {
    const int b = plan.mapping[static_cast<size_t>(i)];
    const bool same_block = (b / 4) == ((i % 16) / 4);
    CHECK(same_block);
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) CHECK(out(c, i, y, x) == base.frames(c, b, y, x));
      }
    }
  }
  // frame 17 must equal one of base frames {0,1,2,3} bitwise
  CHECK(plan.mapping[17] >= 0);
  CHECK(plan.mapping[17] < 4);
}

TEST_CASE("materialize rejects mismatched base") {
  const BaseNoise base = make_base_noise(2, 8, 3, 3, 1, 1);
  const ShufflePlan plan = build_shuffle_plan(4, 2, 8, 1);
  CHECK_THROWS_AS(materialize_noise(plan, base), ShapeError);
}

TEST_CASE("verify_window_coverage detects corruption") {
  ShufflePlan plan = build_shuffle_plan(16, 4, 64, 3);
  CHECK(verify_window_coverage(plan, 16, 4));
  plan.mapping[20] = 0;  // duplicates base 0 inside windows that held base 4..7
  CHECK_FALSE(verify_window_coverage(plan, 16, 4));
}

TEST_CASE("verify_window_coverage single identity window") {
  const ShufflePlan plan = build_shuffle_plan(8, 2, 8, 9);
  CHECK(verify_window_coverage(plan, 8, 8));
}
