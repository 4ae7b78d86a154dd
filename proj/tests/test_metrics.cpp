#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "spikedet/metrics.hpp"
#include "spikedet/rng.hpp"

using namespace spikedet;

namespace {

SpikeSet make_set(std::vector<std::size_t> idx) {
  return SpikeSet::from_unsorted(std::move(idx));
}

SpikeSet random_subset(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(k);
  return SpikeSet::from_unsorted(std::move(pool));
}

}  // namespace

TEST_CASE("score: worked example") {
  const ConfusionCounts c = score(make_set({5, 20}), make_set({5, 30}), 96);
  CHECK(c.tp == 1);
  CHECK(c.fp == 1);
  CHECK(c.fn == 1);
  CHECK(c.tn == 93);
}

TEST_CASE("score: empty sets") {
  const ConfusionCounts c = score(SpikeSet{}, SpikeSet{}, 96);
  CHECK(c.tp == 0);
  CHECK(c.fp == 0);
  CHECK(c.tn == 96);
  CHECK(c.fn == 0);
}

TEST_CASE("score: perfect detection") {
  const ConfusionCounts c = score(make_set({0, 1, 2}), make_set({0, 1, 2}), 3);
  CHECK(c.tp == 3);
  CHECK(c.fp == 0);
  CHECK(c.tn == 0);
  CHECK(c.fn == 0);
}

TEST_CASE("score: rejects out-of-range indices") {
  CHECK_THROWS_AS(score(make_set({96}), SpikeSet{}, 96), InputError);
  CHECK_THROWS_AS(score(SpikeSet{}, make_set({100}), 96), InputError);
}

TEST_CASE("sensitivity and specificity: worked examples") {
  const ConfusionCounts c{1, 1, 93, 1};
  CHECK(*sensitivity(c) == doctest::Approx(0.5));
  CHECK(*specificity(c) == doctest::Approx(93.0 / 94.0));

  const ConfusionCounts none{0, 0, 94, 2};
  CHECK(*sensitivity(none) == doctest::Approx(0.0));

  const ConfusionCounts perfect{5, 0, 91, 0};
  CHECK(*sensitivity(perfect) == doctest::Approx(1.0));
  CHECK(*specificity(perfect) == doctest::Approx(1.0));
}

TEST_CASE("sensitivity/specificity: undefined on zero denominators") {
  CHECK(!sensitivity(ConfusionCounts{0, 3, 93, 0}).has_value());
  CHECK(!specificity(ConfusionCounts{96, 0, 0, 0}).has_value());
}

TEST_CASE("score properties over random set pairs") {
  std::mt19937_64 rng(derive_seed(42, 1));
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 20 + trial % 80;
    std::uniform_int_distribution<std::size_t> count(0, n / 3);
    const SpikeSet a = random_subset(n, count(rng), rng);
    const SpikeSet b = random_subset(n, count(rng), rng);

    const ConfusionCounts ab = score(a, b, n);
    const ConfusionCounts ba = score(b, a, n);

    // components sum to n
    CHECK(ab.total() == n);
    // swapping the sets swaps fp and fn, keeps tp and tn
    CHECK(ab.tp == ba.tp);
    CHECK(ab.tn == ba.tn);
    CHECK(ab.fp == ba.fn);
    CHECK(ab.fn == ba.fp);

    // metrics are invariant under a common permutation of indices
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    auto apply = [&](const SpikeSet& s) {
      std::vector<std::size_t> mapped;
      for (auto i : s.indices) mapped.push_back(perm[i]);
      return SpikeSet::from_unsorted(std::move(mapped));
    };
    const ConfusionCounts pc = score(apply(a), apply(b), n);
    CHECK(pc.tp == ab.tp);
    CHECK(pc.fp == ab.fp);
    CHECK(pc.tn == ab.tn);
    CHECK(pc.fn == ab.fn);
  }
}
