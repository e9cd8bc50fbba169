#include "doctest.h"
#include "oracles.hpp"
#include "xcos/ops.hpp"
#include "xcos/rng.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

using namespace xcos;

TEST_CASE("conv2d 1x1 identity kernel passes input through") {
  Rng rng(1);
  Tensor input = oracle::random_tensor({1, 5, 5}, rng);
  Tensor kernel({1, 1, 1, 1}, {1.0});
  Tensor bias({1});
  Tensor out = ops::conv2d(input, kernel, bias, 1, 0);
  REQUIRE(out.same_shape(input));
  for (int i = 0; i < out.size(); ++i) CHECK(out[i] == input[i]);
}

TEST_CASE("conv2d averaging kernel keeps a constant input constant inside") {
  Tensor input({1, 6, 6});
  input.fill(3.25);
  Tensor kernel({1, 1, 3, 3});
  kernel.fill(1.0 / 9.0);
  Tensor bias({1});
  Tensor out = ops::conv2d(input, kernel, bias, 1, 1);
  // interior entries see the full 3x3 support
  for (int y = 1; y < 5; ++y) {
    for (int x = 1; x < 5; ++x) {
      CHECK(out.at({0, y, x}) == doctest::Approx(3.25).epsilon(1e-12));
    }
  }
}

TEST_CASE("conv2d matches the direct-loop oracle on random instances") {
  Rng rng(42);
  Tensor input = oracle::random_tensor({1, 4, 4}, rng);
  Tensor kernel = oracle::random_tensor({2, 1, 3, 3}, rng);
  Tensor bias = oracle::random_tensor({2}, rng);
  Tensor got = ops::conv2d(input, kernel, bias, 1, 0);
  Tensor want = oracle::conv2d(input, kernel, bias, 1, 0);
  REQUIRE(got.same_shape(want));
  for (int i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("conv2d equals the oracle over the full shape matrix") {
  Rng rng(7);
  for (int c_in : {1, 3, 4}) {
    for (int hw : {3, 5, 8}) {
      for (int c_out : {1, 4}) {
        for (int k : {1, 3}) {
          for (int stride : {1, 2}) {
            for (int padding : {0, 1}) {
              if (k > hw + 2 * padding) continue;
              Tensor input = oracle::random_tensor({c_in, hw, hw}, rng);
              Tensor kernel = oracle::random_tensor({c_out, c_in, k, k}, rng);
              Tensor bias = oracle::random_tensor({c_out}, rng);
              Tensor got = ops::conv2d(input, kernel, bias, stride, padding);
              Tensor want = oracle::conv2d(input, kernel, bias, stride, padding);
              REQUIRE(got.same_shape(want));
              for (int i = 0; i < got.size(); ++i) {
                CHECK(std::fabs(got[i] - want[i]) < 1e-12);
              }
            }
          }
        }
      }
    }
  }
}

TEST_CASE("conv2d rejects channel mismatch with a shape diagnostic") {
  Tensor input({2, 4, 4});
  Tensor kernel({1, 3, 3, 3});
  Tensor bias({1});
  CHECK_THROWS_WITH_AS(ops::conv2d(input, kernel, bias, 1, 0),
                       doctest::Contains("channel mismatch"), std::invalid_argument);
}

TEST_CASE("relu clamps negatives") {
  Tensor x({3}, {-1.0, 0.0, 2.0});
  Tensor y = ops::relu(x);
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 0.0);
  CHECK(y[2] == 2.0);

  Tensor neg({4}, {-3.0, -0.5, -1e9, -1e-9});
  Tensor zeroed = ops::relu(neg);
  for (int i = 0; i < zeroed.size(); ++i) CHECK(zeroed[i] == 0.0);

  Rng rng(3);
  Tensor r = oracle::random_tensor({17}, rng, -2.0, 2.0);
  Tensor out = ops::relu(r);
  for (int i = 0; i < r.size(); ++i) CHECK(out[i] == (r[i] > 0.0 ? r[i] : 0.0));
}

TEST_CASE("l2_normalize basic identities") {
  Tensor v({2}, {3.0, 4.0});
  Tensor n = ops::l2_normalize(v);
  CHECK(n[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(n[1] == doctest::Approx(0.8).epsilon(1e-15));

  Tensor unit({3}, {0.0, 1.0, 0.0});
  Tensor same = ops::l2_normalize(unit);
  for (int i = 0; i < 3; ++i) CHECK(same[i] == unit[i]);

  Tensor zero({5});
  Tensor guarded = ops::l2_normalize(zero, 1e-12);
  for (int i = 0; i < 5; ++i) CHECK(guarded[i] == 0.0);
}

TEST_CASE("cosine agrees with the scalar oracle and its symmetries") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor u = oracle::random_tensor({32}, rng);
    Tensor v = oracle::random_tensor({32}, rng);
    const double got = ops::cosine(u, v);
    const double want = oracle::cosine(u.entries(), v.entries());
    CHECK(std::fabs(got - want) < 1e-12);
    CHECK(got >= -1.0 - 1e-12);
    CHECK(got <= 1.0 + 1e-12);
    // symmetry and positive-scale invariance
    CHECK(std::fabs(ops::cosine(v, u) - got) < 1e-12);
    const double alpha = rng.next_real(0.1, 10.0);
    Tensor su = u;
    for (int i = 0; i < su.size(); ++i) su[i] *= alpha;
    CHECK(std::fabs(ops::cosine(su, v) - got) < 1e-12);
  }
}

TEST_CASE("cosine trivial values and guards") {
  Tensor u({2}, {1.0, 0.0});
  Tensor v({2}, {0.0, 1.0});
  CHECK(ops::cosine(u, u) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ops::cosine(u, v) == 0.0);
  Tensor zero({2});
  CHECK(ops::cosine(u, zero) == 0.0);
  Tensor w({3});
  CHECK_THROWS_AS(ops::cosine(u, w), std::invalid_argument);
}

TEST_CASE("softmax_flat normalization, shift invariance, oracle match") {
  Tensor equal({49});
  equal.fill(0.37);
  Tensor u = ops::softmax_flat(equal);
  for (int i = 0; i < 49; ++i) CHECK(u[i] == doctest::Approx(1.0 / 49.0).epsilon(1e-14));

  Tensor sat({2}, {0.0, 60.0});
  Tensor s = ops::softmax_flat(sat);
  CHECK(s[0] < 1e-20);
  CHECK(s[1] == doctest::Approx(1.0).epsilon(1e-14));

  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor x = oracle::random_tensor({49}, rng, -3.0, 3.0);
    Tensor y = ops::softmax_flat(x);
    std::vector<double> want = oracle::softmax(x.entries());
    double total = 0.0;
    for (int i = 0; i < 49; ++i) {
      CHECK(std::fabs(y[i] - want[i]) < 1e-12);
      CHECK(y[i] > 0.0);
      total += y[i];
    }
    CHECK(std::fabs(total - 1.0) < 1e-12);

    Tensor shifted = x;
    const double c = rng.next_real(-5.0, 5.0);
    for (int i = 0; i < 49; ++i) shifted[i] += c;
    Tensor ys = ops::softmax_flat(shifted);
    for (int i = 0; i < 49; ++i) CHECK(std::fabs(ys[i] - y[i]) < 1e-12);
  }
}

TEST_CASE("concat_channels layout and round trip") {
  Rng rng(9);
  Tensor a = oracle::random_tensor({16, 7, 7}, rng);
  Tensor b = oracle::random_tensor({16, 7, 7}, rng);
  Tensor c = ops::concat_channels(a, b);
  REQUIRE(c.shape() == std::vector<int>{32, 7, 7});
  for (int i = 0; i < a.size(); ++i) CHECK(c[i] == a[i]);
  for (int i = 0; i < b.size(); ++i) CHECK(c[a.size() + i] == b[i]);

  Tensor bad({16, 6, 7});
  CHECK_THROWS_AS(ops::concat_channels(a, bad), std::invalid_argument);
}

TEST_CASE("forward ops keep finite inputs finite") {
  Rng rng(13);
  Tensor input = oracle::random_tensor({3, 8, 8}, rng, -50.0, 50.0);
  Tensor kernel = oracle::random_tensor({4, 3, 3, 3}, rng, -5.0, 5.0);
  Tensor bias = oracle::random_tensor({4}, rng);
  CHECK(ops::conv2d(input, kernel, bias, 2, 1).all_finite());
  CHECK(ops::relu(input).all_finite());
  CHECK(ops::softmax_flat(input.flattened()).all_finite());
  CHECK(ops::l2_normalize(Tensor({3})).all_finite());
}
