#include <cmath>
#include <vector>

#include "doctest.h"
#include "odml/error.hpp"
#include "odml/layers.hpp"
#include "odml/losses.hpp"
#include "odml/rng.hpp"

using namespace odml;

namespace {

Matrix random_unit_rows(std::size_t n, std::size_t dim, Rng& rng) {
  Matrix raw(n, dim);
  for (double& v : raw.data()) v = rng.gaussian();
  return l2_normalize_forward(raw, nullptr);
}

}  // namespace

TEST_CASE("triplet loss on the worked triangle") {
  Matrix z(3, 2, {1.0, 0.0, 0.8, 0.6, 0.6, 0.8});
  std::vector<Triplet> triplets{{1, 0, 2}};
  auto result = triplet_loss(z, triplets, 0.2, TripletReduction::sum);
  CHECK(result.value ==
        doctest::Approx(std::sqrt(0.4) - std::sqrt(0.08) + 0.2).epsilon(1e-12));
  CHECK(result.value == doctest::Approx(0.54961).epsilon(1e-4));
}

TEST_CASE("satisfied triplets cost nothing") {
  // Positive on top of the anchor, negative exactly margin away.
  Matrix z(3, 2, {0.0, 0.0, 0.0, 0.0, 0.2, 0.0});
  auto result = triplet_loss(z, {{0, 1, 2}}, 0.2);
  CHECK(result.value == 0.0);
  CHECK(result.embedding_grad == Matrix(3, 2));
}

TEST_CASE("empty triplet list gives zero loss and gradient") {
  Matrix z(4, 3, 1.0);
  auto result = triplet_loss(z, {}, 0.2);
  CHECK(result.value == 0.0);
  CHECK(result.embedding_grad == Matrix(4, 3));
}

TEST_CASE("triplet loss is never negative and detects satisfaction exactly") {
  Rng rng(51);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 3 + rng.below(6);
    Matrix z = random_unit_rows(n, 4, rng);
    std::vector<Triplet> triplets;
    for (int t = 0; t < 5; ++t) {
      std::size_t a = rng.below(n), p = rng.below(n), neg = rng.below(n);
      triplets.push_back({a, p, neg});
    }
    const double margin = rng.uniform(0.0, 0.5);
    auto result = triplet_loss(z, triplets, margin);
    CHECK(result.value >= 0.0);

    bool all_satisfied = true;
    for (const Triplet& t : triplets) {
      const double d_ap = euclidean_distance(z.row(t.anchor), z.row(t.positive));
      const double d_an = euclidean_distance(z.row(t.anchor), z.row(t.negative));
      if (d_ap + margin > d_an) all_satisfied = false;
    }
    CHECK((result.value == 0.0) == all_satisfied);
  }
}

TEST_CASE("mean reduction averages the sum form") {
  Rng rng(52);
  Matrix z = random_unit_rows(6, 3, rng);
  std::vector<Triplet> triplets{{0, 1, 2}, {3, 4, 5}, {1, 0, 4}};
  auto sum = triplet_loss(z, triplets, 0.3, TripletReduction::sum);
  auto mean = triplet_loss(z, triplets, 0.3, TripletReduction::mean);
  CHECK(mean.value == doctest::Approx(sum.value / 3.0).epsilon(1e-12));
  for (std::size_t i = 0; i < z.size(); ++i) {
    CHECK(mean.embedding_grad.data()[i] ==
          doctest::Approx(sum.embedding_grad.data()[i] / 3.0).epsilon(1e-12));
  }
}

TEST_CASE("triplet loss rejects stray indices") {
  Matrix z(3, 2, 0.5);
  CHECK_THROWS_AS((void)triplet_loss(z, {{0, 1, 3}}, 0.2), ValidationError);
  CHECK_THROWS_AS((void)triplet_loss(z, {{7, 1, 2}}, 0.2), ValidationError);
  CHECK_THROWS_AS((void)triplet_loss(z, {{0, 1, 2}}, -0.1), ValidationError);
}

TEST_CASE("triplet gradients match finite differences") {
  Rng rng(53);
  int checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 4 + rng.below(4);
    Matrix z = random_unit_rows(n, 3, rng);
    std::vector<Triplet> triplets;
    for (int t = 0; t < 4; ++t) {
      const std::size_t a = rng.below(n);
      std::size_t p = rng.below(n - 1);
      if (p >= a) ++p;
      std::size_t neg = rng.below(n - 1);
      if (neg >= a) ++neg;
      triplets.push_back({a, p, neg});
    }
    const double margin = rng.uniform(0.05, 0.4);
    const auto reduction = trial % 2 == 0 ? TripletReduction::mean : TripletReduction::sum;
    auto analytic = triplet_loss(z, triplets, margin, reduction);

    // Skip instances where a probe could cross the hinge or a distance
    // could vanish; the subgradient choice there is not the FD value.
    bool near_kink = false;
    for (const Triplet& t : triplets) {
      const double d_ap = euclidean_distance(z.row(t.anchor), z.row(t.positive));
      const double d_an = euclidean_distance(z.row(t.anchor), z.row(t.negative));
      if (std::fabs(d_ap - d_an + margin) < 1e-3 || d_ap < 1e-3 || d_an < 1e-3) {
        near_kink = true;
      }
    }
    if (near_kink) continue;
    ++checked;

    const double h = 1e-6;
    for (int probe = 0; probe < 6; ++probe) {
      const std::size_t idx = rng.below(z.size());
      const double saved = z.data()[idx];
      z.data()[idx] = saved + h;
      const double plus = triplet_loss(z, triplets, margin, reduction).value;
      z.data()[idx] = saved - h;
      const double minus = triplet_loss(z, triplets, margin, reduction).value;
      z.data()[idx] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double analytic_g = analytic.embedding_grad.data()[idx];
      const double denom = std::max({1.0, std::fabs(numeric), std::fabs(analytic_g)});
      CHECK(std::fabs(numeric - analytic_g) / denom < 1e-4);
    }
  }
  CHECK(checked >= 30);
}

TEST_CASE("cross entropy on the worked two-class example") {
  Matrix logits(1, 2, {1.0, 2.0});
  auto result = cross_entropy(logits, {1});
  CHECK(result.value == doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-12));
  CHECK(result.value == doctest::Approx(0.31326).epsilon(1e-4));
}

TEST_CASE("uniform logits cost ln K") {
  for (std::size_t k : {2, 6, 12}) {
    Matrix logits(3, k, 0.7);
    auto result = cross_entropy(logits, {0, k / 2, k - 1});
    CHECK(result.value == doctest::Approx(std::log(static_cast<double>(k))).epsilon(1e-12));
  }
}

TEST_CASE("confident correct logits drive the loss to zero") {
  double prev = 1e9;
  for (double margin : {2.0, 5.0, 10.0, 20.0}) {
    Matrix logits(1, 3, {0.0, margin, 0.0});
    auto result = cross_entropy(logits, {1});
    CHECK(result.value < prev);
    prev = result.value;
  }
  CHECK(prev < 1e-8);
}

TEST_CASE("cross entropy survives huge logits via max subtraction") {
  Matrix logits(1, 2, {1000.0, 1001.0});
  auto result = cross_entropy(logits, {1});
  CHECK(std::isfinite(result.value));
  CHECK(result.value == doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-9));
}

TEST_CASE("cross entropy is shift invariant per row") {
  Rng rng(54);
  Matrix logits(4, 5);
  for (double& v : logits.data()) v = rng.gaussian();
  std::vector<std::size_t> targets{0, 2, 4, 1};
  auto base = cross_entropy(logits, targets);
  Matrix shifted = logits;
  for (std::size_t r = 0; r < 4; ++r) {
    const double c = rng.uniform(-5.0, 5.0);
    for (std::size_t j = 0; j < 5; ++j) shifted(r, j) += c;
  }
  auto moved = cross_entropy(shifted, targets);
  CHECK(moved.value == doctest::Approx(base.value).epsilon(1e-10));
}

TEST_CASE("scaling class weights scales the loss") {
  Rng rng(55);
  Matrix logits(3, 4);
  for (double& v : logits.data()) v = rng.gaussian();
  std::vector<std::size_t> targets{1, 3, 0};
  std::vector<double> weights{0.5, 1.5, 2.0, 1.0};
  auto base = cross_entropy(logits, targets, weights);
  std::vector<double> scaled = weights;
  for (double& w : scaled) w *= 3.0;
  auto result = cross_entropy(logits, targets, scaled);
  CHECK(result.value == doctest::Approx(3.0 * base.value).epsilon(1e-12));
  for (std::size_t i = 0; i < result.logit_grad.size(); ++i) {
    CHECK(result.logit_grad.data()[i] ==
          doctest::Approx(3.0 * base.logit_grad.data()[i]).epsilon(1e-12));
  }
}

TEST_CASE("per-class weights reweight exactly the target rows") {
  Matrix logits(2, 2, {1.0, 2.0, 1.0, 2.0});
  std::vector<double> weights{1.0, 4.0};
  auto weighted = cross_entropy(logits, {1, 1}, weights);
  auto uniform = cross_entropy(logits, {1, 1});
  CHECK(weighted.value == doctest::Approx(4.0 * uniform.value).epsilon(1e-12));
}

TEST_CASE("cross entropy gradients match finite differences") {
  Rng rng(56);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t batch = 1 + rng.below(5);
    const std::size_t k = 2 + rng.below(6);
    Matrix logits(batch, k);
    for (double& v : logits.data()) v = rng.gaussian();
    std::vector<std::size_t> targets;
    for (std::size_t b = 0; b < batch; ++b) targets.push_back(rng.below(k));
    std::vector<double> weights;
    if (trial % 2 == 0) {
      for (std::size_t j = 0; j < k; ++j) weights.push_back(rng.uniform(0.2, 3.0));
    }

    auto analytic = cross_entropy(logits, targets, weights);
    const double h = 1e-6;
    for (int probe = 0; probe < 8; ++probe) {
      const std::size_t idx = rng.below(logits.size());
      const double saved = logits.data()[idx];
      logits.data()[idx] = saved + h;
      const double plus = cross_entropy(logits, targets, weights).value;
      logits.data()[idx] = saved - h;
      const double minus = cross_entropy(logits, targets, weights).value;
      logits.data()[idx] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double analytic_g = analytic.logit_grad.data()[idx];
      const double denom = std::max({1.0, std::fabs(numeric), std::fabs(analytic_g)});
      CHECK(std::fabs(numeric - analytic_g) / denom < 1e-4);
    }
  }
}

TEST_CASE("cross entropy rejects malformed calls") {
  Matrix logits(2, 3, 0.0);
  CHECK_THROWS_AS((void)cross_entropy(logits, {0}), DimensionError);
  CHECK_THROWS_AS((void)cross_entropy(logits, {0, 3}), ValidationError);
  CHECK_THROWS_AS((void)cross_entropy(logits, {0, 1}, {1.0}), ValidationError);
  CHECK_THROWS_AS((void)cross_entropy(Matrix(), {}), ValidationError);
}

TEST_CASE("combined loss blends with the configured weights") {
  LossConfig cfg;
  cfg.alpha = 0.5;
  cfg.beta = 0.5;
  CHECK(combined_loss(0.5, 0.3, cfg) == doctest::Approx(0.4).epsilon(1e-15));

  cfg.alpha = 0.0;
  cfg.beta = 2.0;
  CHECK(combined_loss(123.0, 0.3, cfg) == doctest::Approx(0.6).epsilon(1e-15));

  cfg.alpha = 1.0;
  cfg.beta = 0.0;
  CHECK(combined_loss(0.7, 55.0, cfg) == doctest::Approx(0.7).epsilon(1e-15));

  CHECK_THROWS_AS((void)combined_loss(std::nan(""), 0.0, cfg), NumericError);
}

TEST_CASE("loss configuration validation") {
  LossConfig cfg;
  cfg.validate(6);

  LossConfig zero;
  zero.alpha = 0.0;
  zero.beta = 0.0;
  CHECK_THROWS_AS(zero.validate(6), ValidationError);

  LossConfig negative;
  negative.alpha = -0.1;
  CHECK_THROWS_AS(negative.validate(6), ValidationError);

  LossConfig bad_margin;
  bad_margin.margin = -0.2;
  CHECK_THROWS_AS(bad_margin.validate(6), ValidationError);

  LossConfig wrong_weights;
  wrong_weights.class_weights = {1.0, 2.0};
  CHECK_THROWS_AS(wrong_weights.validate(6), ValidationError);

  LossConfig zero_weight;
  zero_weight.class_weights = {1.0, 0.0, 1.0};
  CHECK_THROWS_AS(zero_weight.validate(3), ValidationError);
}
