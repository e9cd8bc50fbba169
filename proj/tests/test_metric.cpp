#include "doctest.h"
#include "oracles.hpp"
#include "xcos/metric.hpp"

#include <cmath>
#include <stdexcept>

using namespace xcos;

namespace {

GridFeature random_grid(Rng& rng, int c = 32, int h = 7, int w = 7) {
  return GridFeature{oracle::random_tensor({c, h, w}, rng)};
}

}  // namespace

TEST_CASE("patched cosine map of a feature with itself is all ones") {
  Rng rng(11);
  GridFeature f = random_grid(rng);
  PatchedCosineMap s = patched_cosine_map(f, f);
  for (int i = 0; i < s.values.size(); ++i) {
    CHECK(s.values[i] == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("patched cosine map matches 49 independent scalar cosines") {
  Rng rng(12);
  GridFeature fa = random_grid(rng);
  GridFeature fb = random_grid(rng);
  PatchedCosineMap s = patched_cosine_map(fa, fb);
  PatchedCosineMap s_rev = patched_cosine_map(fb, fa);
  for (int i = 0; i < 7; ++i) {
    for (int j = 0; j < 7; ++j) {
      const double want = oracle::cosine(fa.grid_vector(i, j).entries(),
                                         fb.grid_vector(i, j).entries());
      CHECK(std::fabs(s.values.at({i, j}) - want) < 1e-12);
      CHECK(s.values.at({i, j}) == s_rev.values.at({i, j}));
      CHECK(s.values.at({i, j}) >= -1.0 - 1e-9);
      CHECK(s.values.at({i, j}) <= 1.0 + 1e-9);
    }
  }
}

TEST_CASE("patched cosine map handles orthogonal and zero grids") {
  Tensor a({2, 1, 1}, {1.0, 0.0});
  Tensor b({2, 1, 1}, {0.0, 1.0});
  CHECK(patched_cosine_map(GridFeature{a}, GridFeature{b}).values[0] == 0.0);
  Tensor z({2, 1, 1});
  CHECK(patched_cosine_map(GridFeature{a}, GridFeature{z}).values[0] == 0.0);

  Tensor other({2, 2, 2});
  CHECK_THROWS_AS(patched_cosine_map(GridFeature{a}, GridFeature{other}), std::invalid_argument);
}

TEST_CASE("patched cosine map is invariant to per-grid positive rescaling") {
  Rng rng(13);
  GridFeature fa = random_grid(rng, 8, 3, 3);
  GridFeature fb = random_grid(rng, 8, 3, 3);
  GridFeature scaled = fa;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double alpha = rng.next_real(0.05, 20.0);
      for (int c = 0; c < 8; ++c) scaled.values.at({c, i, j}) *= alpha;
    }
  }
  PatchedCosineMap s1 = patched_cosine_map(fa, fb);
  PatchedCosineMap s2 = patched_cosine_map(scaled, fb);
  for (int i = 0; i < s1.values.size(); ++i) {
    CHECK(std::fabs(s1.values[i] - s2.values[i]) < 1e-9);
  }
}

TEST_CASE("unit attention is uniform and normalized") {
  AttentionMap u = unit_attention(7, 7);
  CHECK(u.variant == AttentionVariant::unit);
  for (int i = 0; i < 49; ++i) CHECK(u.values[i] == 1.0 / 49.0);

  AttentionMap single = unit_attention(1, 1);
  CHECK(single.values[0] == 1.0);

  for (int h = 1; h <= 16; ++h) {
    for (int w = 1; w <= 16; ++w) {
      AttentionMap map = unit_attention(h, w);
      double sum = 0.0;
      for (int i = 0; i < map.values.size(); ++i) sum += map.values[i];
      CHECK(std::fabs(sum - 1.0) < 1e-12);  // exact only when h*w is a power of two
    }
  }
}

TEST_CASE("xcos is the Frobenius inner product with its identities") {
  Tensor ones({7, 7});
  ones.fill(1.0);
  XcosScore unit_score = xcos::xcos(PatchedCosineMap{ones}, unit_attention(7, 7));
  CHECK(unit_score.value == doctest::Approx(1.0).epsilon(1e-12));

  Tensor s({2, 2}, {1.0, 0.0, 0.0, 1.0});
  Tensor w({2, 2}, {0.5, 0.0, 0.0, 0.5});
  CHECK(xcos::xcos(PatchedCosineMap{s}, AttentionMap{AttentionVariant::unit, w}).value ==
        doctest::Approx(1.0).epsilon(1e-15));

  Rng rng(14);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor rs = oracle::random_tensor({7, 7}, rng);
    Tensor rw = oracle::random_tensor({7, 7}, rng);
    double want = 0.0;
    for (int i = 0; i < 7; ++i) {
      for (int j = 0; j < 7; ++j) want += rs.at({i, j}) * rw.at({i, j});
    }
    const XcosScore score = xcos::xcos(PatchedCosineMap{rs}, AttentionMap{AttentionVariant::unit, rw});
    CHECK(std::fabs(score.value - want) < 1e-12);
    // the producing maps are retained for explanation export
    CHECK(score.similarity.values.entries() == rs.entries());
    CHECK(score.attention.values.entries() == rw.entries());
  }

  Tensor mismatched({3, 3});
  CHECK_THROWS_AS(xcos::xcos(PatchedCosineMap{s}, AttentionMap{AttentionVariant::unit, mismatched}),
                  std::invalid_argument);
}

TEST_CASE("unit-attention xcos equals the mean of the cosine map") {
  Rng rng(15);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor s = oracle::random_tensor({7, 7}, rng);
    double mean = 0.0;
    for (int i = 0; i < s.size(); ++i) mean += s[i];
    mean /= s.size();
    CHECK(std::fabs(xcos::xcos(PatchedCosineMap{s}, unit_attention(7, 7)).value - mean) < 1e-12);
  }
}

TEST_CASE("xcos with simplex weights stays inside the score range") {
  Rng rng(16);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor s = oracle::random_tensor({7, 7}, rng);
    Tensor logits = oracle::random_tensor({49}, rng, -2.0, 2.0);
    Tensor w = ops::softmax_flat(logits).reshaped({7, 7});
    const double value = xcos::xcos(PatchedCosineMap{s}, AttentionMap{AttentionVariant::learned, w}).value;
    double lo = s[0], hi = s[0];
    for (int i = 1; i < s.size(); ++i) {
      lo = std::min(lo, s[i]);
      hi = std::max(hi, s[i]);
    }
    CHECK(value >= lo - 1e-12);
    CHECK(value <= hi + 1e-12);
  }
}

TEST_CASE("verify uses strict inequality") {
  XcosScore score;
  score.value = 0.9;
  CHECK(verify(score, 0.5));
  score.value = 0.5;
  CHECK_FALSE(verify(score, 0.5));
  score.value = -0.2;
  CHECK_FALSE(verify(score, 0.0));
}

namespace {

std::vector<CalibrationSample> make_samples(int n, Rng& rng) {
  std::vector<CalibrationSample> samples;
  for (int p = 0; p < n; ++p) {
    CalibrationSample s;
    s.grid_a = random_grid(rng, 4, 3, 3);
    s.grid_b = random_grid(rng, 4, 3, 3);
    s.teacher_score = rng.next_real(-1.0, 1.0);
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace

TEST_CASE("correlated attention reproduces the brute-force Pearson formula") {
  Rng rng(17);
  std::vector<CalibrationSample> samples = make_samples(50, rng);
  CalibrationTable table = correlated_attention(samples, "test");
  CHECK(table.pair_count == 50);

  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      std::vector<double> local, teacher;
      for (const CalibrationSample& s : samples) {
        local.push_back(ops::cosine(s.grid_a.grid_vector(i, j), s.grid_b.grid_vector(i, j)));
        teacher.push_back(s.teacher_score);
      }
      const double want = oracle::pearson(local, teacher);
      CHECK(std::fabs(table.correlations.at({i, j}) - want) < 1e-9);
      CHECK(table.correlations.at({i, j}) >= -1.0);
      CHECK(table.correlations.at({i, j}) <= 1.0);
    }
  }
}

TEST_CASE("correlated attention perfect and anti-correlated cases") {
  // One-channel 1x1 grids: the local cosine is the sign product, so scale
  // the teacher to exactly track / negate it.
  std::vector<CalibrationSample> samples;
  Rng rng(18);
  for (int p = 0; p < 10; ++p) {
    CalibrationSample s;
    const double va = rng.next_real(0.5, 2.0) * (p % 2 == 0 ? 1.0 : -1.0);
    s.grid_a = GridFeature{Tensor({1, 1, 1}, {va})};
    s.grid_b = GridFeature{Tensor({1, 1, 1}, {1.0})};
    s.teacher_score = (va > 0 ? 1.0 : -1.0) * 0.5 + 0.1;  // affine in the local cosine
    samples.push_back(std::move(s));
  }
  CalibrationTable table = correlated_attention(samples);
  CHECK(table.correlations[0] == doctest::Approx(1.0).epsilon(1e-12));

  for (CalibrationSample& s : samples) s.teacher_score = -s.teacher_score;
  CalibrationTable negated = correlated_attention(samples);
  CHECK(negated.correlations[0] == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("correlated attention is invariant to positive affine teacher transforms") {
  Rng rng(19);
  std::vector<CalibrationSample> samples = make_samples(30, rng);
  CalibrationTable base = correlated_attention(samples);
  for (CalibrationSample& s : samples) s.teacher_score = 3.7 * s.teacher_score - 0.45;
  CalibrationTable transformed = correlated_attention(samples);
  for (int i = 0; i < base.correlations.size(); ++i) {
    CHECK(std::fabs(base.correlations[i] - transformed.correlations[i]) < 1e-9);
  }
}

TEST_CASE("correlated attention rejects tiny pair sets and zeroes constant grids") {
  Rng rng(20);
  std::vector<CalibrationSample> one = make_samples(1, rng);
  CHECK_THROWS_AS(correlated_attention(one), std::invalid_argument);

  // A grid whose local cosine never varies carries no signal: weight 0.
  std::vector<CalibrationSample> degenerate;
  for (int p = 0; p < 5; ++p) {
    CalibrationSample s;
    s.grid_a = GridFeature{Tensor({1, 1, 1}, {1.0 + p})};
    s.grid_b = GridFeature{Tensor({1, 1, 1}, {2.0})};
    s.teacher_score = rng.next_real(-1.0, 1.0);
    degenerate.push_back(std::move(s));
  }
  CalibrationTable table = correlated_attention(degenerate);
  CHECK(table.correlations[0] == 0.0);
}

TEST_CASE("calibration table serializes to JSON and back") {
  Rng rng(21);
  CalibrationTable table = correlated_attention(make_samples(10, rng), "teacher-abc");
  table.pair_indices = {{0, 3}, {1, 4}};
  CalibrationTable restored = CalibrationTable::from_json(table.to_json());
  CHECK(restored.pair_count == table.pair_count);
  CHECK(restored.teacher_id == "teacher-abc");
  CHECK(restored.correlations.entries() == table.correlations.entries());
  CHECK(restored.pair_indices == table.pair_indices);
}

TEST_CASE("calibration attention map can clip and renormalize for display") {
  CalibrationTable table;
  table.correlations = Tensor({2, 2}, {0.5, -0.3, 0.25, 0.25});
  table.pair_count = 2;
  AttentionMap raw = table.attention();
  CHECK(raw.variant == AttentionVariant::correlated);
  CHECK(raw.values[1] == -0.3);

  AttentionMap clipped = table.attention(true);
  CHECK(clipped.values[1] == 0.0);
  double sum = 0.0;
  for (int i = 0; i < 4; ++i) sum += clipped.values[i];
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("attention variant names round trip") {
  for (AttentionVariant v :
       {AttentionVariant::unit, AttentionVariant::correlated, AttentionVariant::learned}) {
    CHECK(attention_variant_from_string(to_string(v)) == v);
  }
  CHECK_THROWS_AS(attention_variant_from_string("bogus"), std::invalid_argument);
}
