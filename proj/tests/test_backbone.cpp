#include "doctest.h"
#include "oracles.hpp"
#include "xcos/backbone.hpp"

#include <set>
#include <stdexcept>

using namespace xcos;

TEST_CASE("backbone config validation enforces the 7x7 grid rule") {
  BackboneConfig cfg;
  cfg.validate();  // stock default: 112, four blocks
  CHECK(cfg.grid_height() == 7);
  CHECK(cfg.grid_width() == 7);
  CHECK(cfg.embedding_dim() == 1568);

  BackboneConfig small;
  small.input_height = small.input_width = 56;
  small.block_channels = {16, 32, 64};
  small.validate();
  CHECK(small.grid_height() == 7);

  BackboneConfig bad = cfg;
  bad.input_height = bad.input_width = 100;  // not 7 * 2^k
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  BackboneConfig wrong_blocks = cfg;
  wrong_blocks.input_height = wrong_blocks.input_width = 56;  // needs 3 blocks, has 4
  CHECK_THROWS_AS(wrong_blocks.validate(), std::invalid_argument);

  BackboneConfig degenerate = cfg;
  degenerate.grid_channels = 1;
  CHECK_THROWS_AS(degenerate.validate(), std::invalid_argument);
}

TEST_CASE("extract_grid produces the configured shape across the size matrix") {
  for (int size : {56, 112}) {
    for (int c_f : {8, 32}) {
      BackboneConfig cfg;
      cfg.input_height = cfg.input_width = size;
      cfg.block_channels = size == 112 ? std::vector<int>{16, 32, 64, 128}
                                       : std::vector<int>{16, 32, 64};
      cfg.grid_channels = c_f;
      GridBackbone backbone(cfg, 42);
      Rng rng(1);
      Tensor image = oracle::random_tensor({3, size, size}, rng);
      GridFeature grid = backbone.extract_grid(image);
      CHECK(grid.values.shape() == std::vector<int>{c_f, 7, 7});
      CHECK(grid.values.all_finite());
    }
  }
}

TEST_CASE("extract_grid is deterministic and rejects wrong input sizes") {
  BackboneConfig cfg;
  cfg.input_height = cfg.input_width = 56;
  cfg.block_channels = {8, 16, 32};
  GridBackbone backbone(cfg, 7);
  Rng rng(2);
  Tensor image = oracle::random_tensor({3, 56, 56}, rng);
  GridFeature a = backbone.extract_grid(image);
  GridFeature b = backbone.extract_grid(image);
  CHECK(a.values.entries() == b.values.entries());

  Tensor wrong = oracle::random_tensor({3, 28, 28}, rng);
  CHECK_THROWS_WITH_AS(backbone.extract_grid(wrong), doctest::Contains("(3, 56, 56)"),
                       std::invalid_argument);
}

TEST_CASE("the 1x1 head changes channels only, never the spatial extent") {
  BackboneConfig cfg;
  cfg.input_height = cfg.input_width = 56;
  cfg.block_channels = {8, 16, 24};
  cfg.grid_channels = 6;
  GridBackbone backbone(cfg, 3);
  Rng rng(4);
  Tensor image = oracle::random_tensor({3, 56, 56}, rng);
  Tensor trunk_out = backbone.trunk().forward(image);
  GridFeature grid = backbone.extract_grid(image);
  CHECK(trunk_out.extent(1) == grid.height());
  CHECK(trunk_out.extent(2) == grid.width());
  CHECK(trunk_out.extent(0) == 24);
  CHECK(grid.channels() == 6);
}

TEST_CASE("flatten round-trips and preserves the entry multiset") {
  Rng rng(5);
  GridFeature grid{oracle::random_tensor({32, 7, 7}, rng)};
  Tensor flat = flatten(grid);
  CHECK(flat.shape() == std::vector<int>{1568});
  GridFeature back = unflatten(flat, 32, 7, 7);
  CHECK(back.values.entries() == grid.values.entries());

  std::multiset<double> before(grid.values.entries().begin(), grid.values.entries().end());
  std::multiset<double> after(flat.entries().begin(), flat.entries().end());
  CHECK(before == after);
}

TEST_CASE("grid_vector extracts the channel fiber at a position") {
  Tensor values({2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  GridFeature grid{values};
  Tensor fiber = grid.grid_vector(1, 0);
  CHECK(fiber.shape() == std::vector<int>{2});
  CHECK(fiber[0] == 3.0);  // channel 0 at (1, 0)
  CHECK(fiber[1] == 7.0);  // channel 1 at (1, 0)
}

TEST_CASE("class_cosines matches the per-row oracle and its identities") {
  Rng rng(6);
  Tensor rows = oracle::random_tensor({5, 24}, rng);
  Tensor embedding({24});
  for (int j = 0; j < 24; ++j) embedding[j] = rows.at({2, j});
  Tensor cosines = class_cosines(embedding, rows);
  CHECK(cosines[2] == doctest::Approx(1.0).epsilon(1e-12));

  for (int trial = 0; trial < 10; ++trial) {
    Tensor v = oracle::random_tensor({24}, rng);
    Tensor c = class_cosines(v, rows);
    for (int r = 0; r < 5; ++r) {
      std::vector<double> row(24);
      for (int j = 0; j < 24; ++j) row[static_cast<size_t>(j)] = rows.at({r, j});
      CHECK(std::fabs(c[r] - oracle::cosine(v.entries(), row)) < 1e-12);
      CHECK(c[r] >= -1.0 - 1e-12);
      CHECK(c[r] <= 1.0 + 1e-12);
    }
    // invariance to positive rescaling of the embedding
    Tensor scaled = v;
    const double alpha = rng.next_real(0.1, 10.0);
    for (int j = 0; j < 24; ++j) scaled[j] *= alpha;
    Tensor cs = class_cosines(scaled, rows);
    for (int r = 0; r < 5; ++r) CHECK(std::fabs(cs[r] - c[r]) < 1e-12);
  }
}

TEST_CASE("orthogonal embedding gives a zero class cosine") {
  Tensor rows({2, 2}, {1.0, 0.0, 0.0, 1.0});
  Tensor embedding({2}, {0.0, 3.0});
  Tensor c = class_cosines(embedding, rows);
  CHECK(c[0] == 0.0);
  CHECK(c[1] == doctest::Approx(1.0).epsilon(1e-15));
}
