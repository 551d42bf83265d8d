#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "toolgym/error.hpp"
#include "toolgym/grpo.hpp"
#include "toolgym/rng.hpp"

using namespace toolgym;
using namespace toolgym::grpo;

namespace {

std::vector<double> direct_advantages(const std::vector<double>& r) {
  const double n = static_cast<double>(r.size());
  double mean = 0;
  for (double x : r) mean += x;
  mean /= n;
  double var = 0;
  for (double x : r) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> out;
  for (double x : r) out.push_back(sd < 1e-8 ? (x - mean) / 1e-8 : (x - mean) / sd);
  return out;
}

TokenSequence seq(std::vector<double> ratios_log, std::optional<std::vector<double>> ref = {}) {
  TokenSequence s;
  s.logp_new = ratios_log;
  s.logp_old.assign(ratios_log.size(), 0.0);
  s.logp_ref = std::move(ref);
  return s;
}

}  // namespace

TEST_CASE("group_advantages examples") {
  const std::vector<double> a = group_advantages(std::vector<double>{0, 4});
  CHECK(a == std::vector<double>{-1.0, 1.0});
  CHECK(group_advantages(std::vector<double>{3, 3, 3, 3}) == std::vector<double>{0, 0, 0, 0});
  const auto b = group_advantages(std::vector<double>{0, 4, 4, 8});
  CHECK(b[0] == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-12));
  CHECK(b[1] == 0.0);
  CHECK(b[3] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK_THROWS_WITH_AS(group_advantages(std::vector<double>{1}), doctest::Contains("DegenerateGroup"), Error);
}

TEST_CASE("group_advantages matches direct computation and normalizes") {
  Rng rng(1);
  for (int t = 0; t < 2000; ++t) {
    std::vector<double> r(static_cast<std::size_t>(rng.range(2, 16)));
    for (double& x : r) x = rng.coin() ? static_cast<double>(rng.below(10)) : rng.uniform() * 9;
    const auto a = group_advantages(r);
    const auto o = direct_advantages(r);
    const bool flat = std::all_of(r.begin(), r.end(), [&](double x) { return x == r[0]; });
    double mean = 0, var = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!flat) CHECK(std::abs(a[i] - o[i]) < 1e-9);
      mean += a[i];
    }
    mean /= static_cast<double>(a.size());
    for (double x : a) var += (x - mean) * (x - mean);
    CHECK(std::abs(mean) < 1e-9);
    if (!flat) CHECK(std::abs(std::sqrt(var / static_cast<double>(a.size())) - 1.0) < 1e-9);
    else for (double x : a) CHECK(x == 0.0);

    // ranking is scale invariant
    const double c = 0.1 + rng.uniform() * 10;
    std::vector<double> scaled = r;
    for (double& x : scaled) x *= c;
    const auto as = group_advantages(scaled);
    CHECK(std::max_element(a.begin(), a.end()) - a.begin() == std::max_element(as.begin(), as.end()) - as.begin());
  }
}

TEST_CASE("clipped_surrogate examples") {
  const double one[] = {1.0};
  const double neg[] = {-1.0};
  CHECK(clipped_surrogate({seq({0.0})}, one) == 1.0);
  CHECK(std::abs(clipped_surrogate({seq({std::log(1.5)})}, one) - 1.2) < 1e-12);
  CHECK(std::abs(clipped_surrogate({seq({std::log(0.5)})}, neg) - (-0.8)) < 1e-12);
  CHECK_THROWS_WITH_AS(clipped_surrogate({seq({0.0}), seq({0.0})}, one), doctest::Contains("ShapeMismatch"), Error);
  TokenSequence bad = seq({0.0, 0.0});
  bad.logp_old.pop_back();
  CHECK_THROWS_AS(clipped_surrogate({bad}, one), Error);
}

TEST_CASE("surrogate weighting and clip region") {
  Rng rng(4);
  for (int t = 0; t < 500; ++t) {
    const std::size_t g = static_cast<std::size_t>(rng.range(2, 6));
    TokenBatch batch;
    std::vector<double> adv;
    double expected = 0;
    bool inside = true;
    for (std::size_t i = 0; i < g; ++i) {
      std::vector<double> lp(static_cast<std::size_t>(rng.range(1, 8)));
      const double a = rng.uniform() * 4 - 2;
      double per = 0;
      for (double& x : lp) {
        x = (rng.uniform() - 0.5) * 0.8;
        const double m = std::exp(x);
        inside = inside && m >= 0.8 && m <= 1.2;
        per += std::min(m * a, std::clamp(m, 0.8, 1.2) * a);
      }
      expected += per / (static_cast<double>(g) * static_cast<double>(lp.size()));
      batch.push_back(seq(lp));
      adv.push_back(a);
    }
    CHECK(clipped_surrogate(batch, adv) == doctest::Approx(expected).epsilon(1e-12));
    if (inside) CHECK(clipped_surrogate(batch, adv) == doctest::Approx(unclipped_surrogate(batch, adv)).epsilon(1e-12));
    CHECK(clipped_surrogate(batch, adv) <= unclipped_surrogate(batch, adv) + 1e-12);
  }
}

TEST_CASE("kl_penalty") {
  CHECK(kl_penalty({seq({-0.3, -1.2}, std::vector<double>{-0.3, -1.2})}) == 0.0);
  const double v = kl_penalty({seq({0.0}, std::vector<double>{1.0})});
  CHECK(std::abs(v - (std::exp(1.0) - 2.0)) < 1e-12);
  CHECK_THROWS_WITH_AS(kl_penalty({seq({0.0})}), doctest::Contains("MissingReference"), Error);
  Rng rng(6);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> a(3), b(3);
    for (int i = 0; i < 3; ++i) {
      a[static_cast<std::size_t>(i)] = (rng.uniform() - 0.5) * 10;
      b[static_cast<std::size_t>(i)] = (rng.uniform() - 0.5) * 10;
    }
    CHECK(kl_penalty({seq(a, b)}) >= 0.0);
  }
  GrpoConfig cfg;
  cfg.kl_beta = 0.5;
  const double one[] = {1.0};
  CHECK(std::abs(clipped_surrogate({seq({0.0}, std::vector<double>{1.0})}, one, cfg) -
                 (1.0 - 0.5 * (std::exp(1.0) - 2.0))) < 1e-12);
}

TEST_CASE("pairwise_sum") {
  std::vector<double> v(1000);
  std::iota(v.begin(), v.end(), 1.0);
  CHECK(pairwise_sum(v) == 500500.0);
  CHECK(pairwise_sum({}) == 0.0);
}

TEST_CASE("config validation") {
  GrpoConfig c;
  c.clip_epsilon = 1.5;
  CHECK_THROWS(c.validate());
  c.clip_epsilon = 0.2;
  c.kl_beta = -1;
  CHECK_THROWS(c.validate());
}
