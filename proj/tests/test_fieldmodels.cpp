#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nfcl/encoding.hpp"
#include "nfcl/errors.hpp"
#include "nfcl/model.hpp"
#include "nfcl/trainer.hpp"
#include "support.hpp"

namespace {

using namespace nfcl;
using nfcl::test::random_tensor;

const Arch kArchs[] = {Arch::PeRelu, Arch::Siren, Arch::Finer, Arch::Diner};

GridSpec cube(std::uint32_t n) { return GridSpec{{n, n, n}, std::nullopt}; }

ModelConfig small(Arch arch, std::uint32_t out = 1) {
  ModelConfig c = ModelConfig::defaults(arch, 3, out);
  c.hidden_layers = 2;
  c.hidden_width = 16;
  c.seed = 5;
  return c;
}

TEST(Encoding, Examples) {
  const auto zero = encode_pe(Tensor<double>::matrix(1, 1, {0.0}), 2);
  EXPECT_EQ(zero, Tensor<double>::matrix(1, 4, {0.0, 1.0, 0.0, 1.0}));
  const auto one = encode_pe(Tensor<double>::matrix(1, 1, {1.0}), 1);
  EXPECT_NEAR(one(0, 0), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(one(0, 1), -1.0);
  EXPECT_EQ((PositionalEncoder{10, 4}.output_width()), 80u);
}

TEST(Encoding, SinOddCosEven) {
  std::mt19937_64 rng(2);
  const auto x = random_tensor<double>({20, 3}, rng);
  Tensor<double> neg = x;
  for (auto& v : neg.values()) v = -v;
  const auto a = encode_pe(x, 6);
  const auto b = encode_pe(neg, 6);
  for (std::size_t i = 0; i < a.size(); i += 2) {
    EXPECT_NEAR(a[i], -b[i], 1e-12);
    EXPECT_NEAR(a[i + 1], b[i + 1], 1e-12);
  }
}

TEST(Build, PeReluFirstLayerWidth) {
  const auto m = build_model<float>(ModelConfig::defaults(Arch::PeRelu, 4, 1));
  EXPECT_EQ(m.params().at("layer0.weight").shape(), (std::vector<std::size_t>{256, 80}));
}

TEST(Build, DinerTableShape) {
  const GridSpec grid = cube(8);
  const auto m = build_model<float>(ModelConfig::defaults(Arch::Diner), &grid);
  EXPECT_EQ(m.params().at("table").shape(), (std::vector<std::size_t>{512, 1}));
  EXPECT_EQ(m.params().at("layer0.weight").shape(), (std::vector<std::size_t>{256, 1}));
  for (float v : m.params().at("table").values()) {
    EXPECT_GE(v, -1.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Build, DinerWithoutGridIsConfigError) {
  EXPECT_THROW(build_model<float>(ModelConfig::defaults(Arch::Diner)), ConfigError);
}

TEST(Build, SameSeedSameParams) {
  const GridSpec grid = cube(4);
  for (Arch a : kArchs) {
    EXPECT_EQ(build_model<float>(small(a), &grid).params(), build_model<float>(small(a), &grid).params());
    ModelConfig other = small(a);
    other.seed = 6;
    EXPECT_NE(build_model<float>(small(a), &grid).params(), build_model<float>(other, &grid).params());
  }
}

TEST(Build, SirenInitBounds) {
  ModelConfig c = ModelConfig::defaults(Arch::Siren);
  c.hidden_width = 64;
  const auto m = build_model<double>(c);
  const double first = 1.0 / 3.0;
  const double hidden = std::sqrt(6.0 / 64.0) / 15.0;
  for (double w : m.params().at("layer0.weight").values()) EXPECT_LE(std::abs(w), first);
  double peak = 0;
  for (double w : m.params().at("layer1.weight").values()) peak = std::max(peak, std::abs(w));
  EXPECT_LE(peak, hidden);
  EXPECT_GT(peak, 0.9 * hidden);
}

TEST(Build, FinerFirstBiasSpansUnitInterval) {
  ModelConfig c = ModelConfig::defaults(Arch::Finer);
  c.hidden_width = 256;
  const auto m = build_model<double>(c);
  double peak = 0;
  for (double b : m.params().at("layer0.bias").values()) peak = std::max(peak, std::abs(b));
  EXPECT_GT(peak, 0.9);
  EXPECT_LE(peak, 1.0);
  EXPECT_DOUBLE_EQ(c.omega0, 5.0);
}

TEST(Forward, ZeroWeightsGiveOutputBias) {
  auto m = build_model<float>(small(Arch::Siren, 2));
  for (auto& e : m.params()) e.value.fill(0.0f);
  m.params().at("layer2.bias") = Tensor<float>::vector({0.25f, -3.0f});
  const auto out = m.forward(make_grid<float>(cube(3)));
  for (std::size_t i = 0; i < out.rows(); ++i) {
    EXPECT_EQ(out(i, 0), 0.25f);
    EXPECT_EQ(out(i, 1), -3.0f);
  }
}

TEST(Forward, ShapesAndFinite) {
  const GridSpec grid = cube(5);
  const auto coords = make_grid<float>(grid);
  for (Arch a : kArchs) {
    const auto m = build_model<float>(small(a, 3), &grid);
    const auto out = m.forward(coords);
    EXPECT_EQ(out.shape(), (std::vector<std::size_t>{125, 3})) << arch_name(a);
    for (float v : out.values()) ASSERT_TRUE(std::isfinite(v)) << arch_name(a);
  }
}

TEST(Forward, SoftmaxRowsSumToOne) {
  ModelConfig c = small(Arch::Finer, 4);
  c.head = Head::Softmax;
  const auto m = build_model<float>(c);
  const auto out = m.forward(make_grid<float>(cube(4)));
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double s = 0;
    for (std::size_t j = 0; j < 4; ++j) s += out(i, j);
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Forward, DinerOffGridCoordinateIsRejected) {
  const GridSpec grid = cube(4);
  const auto m = build_model<float>(small(Arch::Diner), &grid);
  EXPECT_THROW(m.forward(Tensor<float>::matrix(1, 3, {0.1f, 0.2f, 0.3f})), UnknownCoordinateError);
  // On-lattice but outside the table: a 5-point lattice position 0 is not on
  // the 4-point lattice either.
  EXPECT_THROW(m.forward(Tensor<float>::matrix(1, 3, {0.0f, 0.0f, 0.0f})), UnknownCoordinateError);
}

TEST(ExpandHead, OldChannelsUnchangedAndNewUniform) {
  const GridSpec grid = cube(4);
  const auto coords = make_grid<float>(grid);
  for (Arch a : kArchs) {
    auto m = build_model<float>(small(a), &grid);
    const auto before = m.forward(coords);
    const ParamSet<float> old = m.params();
    expand_output_head(m, 4, Head::Softmax);
    EXPECT_EQ(m.config().head, Head::Mixed);
    EXPECT_EQ(m.config().out_channels, 5u);
    EXPECT_EQ(m.config().linear_count(), 1u);
    const auto after = m.forward(coords);
    for (std::size_t i = 0; i < coords.rows(); ++i) {
      EXPECT_EQ(after(i, 0), before(i, 0));
      for (std::size_t c = 1; c < 5; ++c) EXPECT_FLOAT_EQ(after(i, c), 0.25f);
    }
    const auto& w = m.params().at("layer2.weight");
    const auto& w_old = old.at("layer2.weight");
    for (std::size_t k = 0; k < w_old.size(); ++k) EXPECT_EQ(w[k], w_old[k]);
  }
}

TEST(ExpandHead, NewRowsReceiveGradient) {
  auto m = build_model<double>(small(Arch::Siren));
  expand_output_head(m, 4, Head::Softmax);
  Task task;
  task.grid = cube(4);
  std::vector<std::uint8_t> labels(64);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<std::uint8_t>(i % 4);
  task.target = Volume::label_map({4, 4, 4}, labels);
  task.loss = LossKind::CrossEntropy;
  task.channels = {1, 5};
  Graph<double> g(m.params());
  const Var raw = m.forward_raw(g, make_grid<double>(task.grid));
  const auto grads = g.backward(fit_loss(g, m, raw, task_targets<double>(task), task.loss, task.channels, 1.0));
  const auto& gw = grads[grads.index_of("layer2.weight")];
  double old_norm = 0, new_norm = 0;
  for (std::size_t k = 0; k < gw.size(); ++k) (k < 16 ? old_norm : new_norm) += gw[k] * gw[k];
  EXPECT_EQ(old_norm, 0.0);
  EXPECT_GT(new_norm, 0.0);
}

TEST(ExpandHead, LinearAfterSoftmaxIsRejected) {
  auto m = build_model<float>(small(Arch::Siren));
  expand_output_head(m, 4, Head::Softmax);
  EXPECT_THROW(expand_output_head(m, 1, Head::Linear), ConfigError);
  EXPECT_THROW(expand_output_head(m, 0, Head::Softmax), ConfigError);
}

TEST(ExpandTable, GrowsAndKeepsOldRows) {
  const GridSpec small_grid{{8, 8, 8}, TimeAxis{2, 0}};
  const GridSpec next{{8, 8, 8}, TimeAxis{2, 1}};
  ModelConfig c = small(Arch::Diner);
  c.in_dim = 4;
  auto m = build_model<float>(c, &small_grid);
  const auto coords = make_grid<float>(small_grid);
  const auto before = m.forward(coords);
  const Tensor<float> old_table = m.params().at("table");

  auto fresh = make_grid<float>(next);
  std::vector<std::uint32_t> first64(64);
  for (std::uint32_t i = 0; i < 64; ++i) first64[i] = i;
  std::mt19937_64 rng(1);
  expand_hash_table(m, gather_rows(fresh, first64), rng);

  const auto& table = m.params().at("table");
  EXPECT_EQ(table.rows(), 576u);
  for (std::size_t k = 0; k < old_table.size(); ++k) EXPECT_EQ(table[k], old_table[k]);
  EXPECT_EQ(m.forward(coords), before);
  EXPECT_NO_THROW(m.forward(gather_rows(fresh, first64)));
}

TEST(ExpandTable, DuplicatesRejectedWithoutMutation) {
  const GridSpec grid = cube(4);
  auto m = build_model<float>(small(Arch::Diner), &grid);
  const ParamSet<float> before = m.params();
  std::mt19937_64 rng(1);
  EXPECT_THROW(expand_hash_table(m, make_grid<float>(grid), rng), ConfigError);
  EXPECT_EQ(m.params(), before);
  EXPECT_EQ(m.coord_index().size(), 64u);

  auto siren = build_model<float>(small(Arch::Siren));
  EXPECT_THROW(expand_hash_table(siren, make_grid<float>(grid), rng), ConfigError);
}

TEST(CoordinateIndex, KeysAreCOrder) {
  const GridSpec grid{{3, 4, 5}, TimeAxis{2, 1}};
  const auto coords = make_grid<double>(grid);
  CoordinateIndex index(lattice_of(grid));
  EXPECT_EQ(index.lattice(), (std::vector<std::uint32_t>{3, 4, 5, 2}));
  // Point (1, 2, 3) at frame 1.
  const std::size_t row = (1 * 4 + 2) * 5 + 3;
  EXPECT_EQ(index.key_of(coords.data() + row * 4), ((1u * 4 + 2) * 5 + 3) * 2 + 1);
}

}  // namespace
