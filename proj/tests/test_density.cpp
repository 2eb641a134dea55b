#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "geosampler/density.hpp"
#include "test_support.hpp"

using namespace geosampler;
using geosampler::testing::vec;

namespace {

CompactBox square(double lo, double hi) { return {vec({lo, lo}), vec({hi, hi})}; }

double total_mass(const DensityGrid& grid) {
  double s = 0.0;
  for (std::size_t i = 0; i < grid.num_cells(); ++i) s += grid.mass(i);
  return s;
}

}  // namespace

TEST(TargetLogDensity, OutsideBoxIsMinusInfinity) {
  const auto model = geosampler::testing::single_centroid_model();
  EXPECT_EQ(target_log_density_unnorm(model, vec({6, 0}), square(-5, 5)),
            -std::numeric_limits<double>::infinity());
  EXPECT_TRUE(std::isfinite(target_log_density_unnorm(model, vec({5, 5}), square(-5, 5))));
}

TEST(TargetLogDensity, ConstantMetricIsZero) {
  EXPECT_EQ(target_log_density_unnorm(MetricModel::constant(2, 1.0), vec({0.2, 0.7}), square(0, 1)),
            0.0);
}

TEST(TargetLogDensity, CentroidMinusCornerClosedForm) {
  const auto model = geosampler::testing::single_centroid_model();
  const CompactBox box = square(-2, 2);
  const double w = std::exp(-8.0 / 0.64);  // corner (2, 2)
  const double expected = std::log(1.0 + 1e-3) - std::log(w + 1e-3);
  const double got = target_log_density_unnorm(model, vec({0, 0}), box) -
                     target_log_density_unnorm(model, vec({2, 2}), box);
  EXPECT_NEAR(got, expected, 1e-12);
}

TEST(TargetLogDensity, IsNegatedLogVolumeElementInsideBox) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto model = geosampler::testing::random_model(rng, 3, 3);
    const CompactBox box{Vector::Constant(3, -10), Vector::Constant(3, 10)};
    const Vector z = geosampler::testing::random_vector(rng, 3, -4, 4);
    EXPECT_NEAR(target_log_density_unnorm(model, z, box), -log_volume_element(model, z), 1e-12);
  }
}

TEST(DensityGrid, ConstantMetricOnUnitBoxIsUniform) {
  const auto model = MetricModel::constant(2, 0.37);
  for (std::size_t r : {8u, 13u, 40u}) {
    const auto grid = build_density_grid(model, square(0, 1), {r, r});
    for (std::size_t i = 0; i < grid.num_cells(); ++i) EXPECT_NEAR(grid.density(i), 1.0, 1e-12);
    EXPECT_NEAR(total_mass(grid), 1.0, 1e-10);
  }
}

TEST(DensityGrid, MassesSumToOne) {
  const auto model = geosampler::testing::two_centroid_model();
  const auto grid = build_density_grid(model, square(-5, 5), {50, 50});
  EXPECT_NEAR(total_mass(grid), 1.0, 1e-10);
  const auto grid3 = build_density_grid(
      geosampler::testing::single_centroid_model(vec({0, 0, 0})),
      {Vector::Constant(3, -3), Vector::Constant(3, 3)}, {8, 9, 10});
  EXPECT_NEAR(total_mass(grid3), 1.0, 1e-10);
}

TEST(DensityGrid, NormalizerConvergesUnderRefinement) {
  const auto model = geosampler::testing::two_centroid_model();
  const auto coarse = build_density_grid(model, square(-5, 5), {200, 200});
  const auto fine = build_density_grid(model, square(-5, 5), {400, 400});
  EXPECT_LT(std::abs(coarse.log_normalizer() - fine.log_normalizer()), 1e-3);
}

TEST(DensityGrid, InvariantUnderGlobalMetricScaling) {
  // Scaling every Lᵢ by s and λ by s² multiplies G⁻¹ by s²; the constant
  // cancels in the normalization.
  const auto base = geosampler::testing::two_centroid_model();
  const double s = 3.0;
  std::vector<Matrix> scaled;
  for (const auto& l : base.factors()) scaled.push_back(s * l);
  const MetricModel model(2, base.centroids(), scaled, base.temperature(),
                          s * s * base.regularization());
  const auto a = build_density_grid(base, square(-5, 5), {40, 40});
  const auto b = build_density_grid(model, square(-5, 5), {40, 40});
  for (std::size_t i = 0; i < a.num_cells(); ++i) EXPECT_NEAR(a.mass(i), b.mass(i), 1e-10);
}

TEST(DensityGrid, RejectsUnsupportedShapes) {
  const auto model4 = MetricModel::constant(4, 1.0);
  EXPECT_THROW(build_density_grid(model4, {Vector::Zero(4), Vector::Ones(4)}, {8, 8, 8, 8}),
               ValidationError);
  const auto model = MetricModel::constant(2, 1.0);
  EXPECT_THROW(build_density_grid(model, square(0, 1), {7, 8}), ValidationError);
  EXPECT_THROW(build_density_grid(model, square(0, 1), {8}), DimensionError);
  EXPECT_THROW(build_density_grid(model, {vec({0, 1}), vec({1, 1})}, {8, 8}), ValidationError);
}

TEST(DensityGrid, CellLookupIsInclusive) {
  const auto grid = build_density_grid(MetricModel::constant(2, 1.0), square(0, 1), {10, 10});
  EXPECT_EQ(grid.cell_of(vec({0, 0})), 0u);
  EXPECT_EQ(grid.cell_of(vec({1, 1})), 99u);
  EXPECT_EQ(grid.cell_of(vec({0.05, 0.95})), 9u);  // last axis fastest
  EXPECT_FALSE(grid.cell_of(vec({1.0001, 0.5})).has_value());
  EXPECT_TRUE(grid.cell_center(9).isApprox(vec({0.05, 0.95}), 1e-15));
}

TEST(TvDistance, AllMassInOneCellAgainstUniform) {
  const auto grid = build_density_grid(MetricModel::constant(2, 1.0), square(0, 1), {8, 8});
  const std::vector<Vector> samples(500, vec({0.3, 0.3}));
  EXPECT_NEAR(tv_distance(grid, samples), 1.0 - 1.0 / 64.0, 1e-12);
}

TEST(TvDistance, OutsideSamplesCountAgainstTheFit) {
  const auto grid = build_density_grid(MetricModel::constant(2, 1.0), square(0, 1), {8, 8});
  std::vector<Vector> samples;
  for (std::size_t i = 0; i < 64; ++i) samples.push_back(grid.cell_center(i));
  EXPECT_NEAR(tv_distance(grid, samples), 0.0, 1e-12);
  samples.insert(samples.end(), 64, vec({2, 2}));
  EXPECT_NEAR(tv_distance(grid, samples), 0.5, 1e-12);
}

TEST(TvDistance, MultinomialDrawsFromTheGridConverge) {
  const auto model = geosampler::testing::two_centroid_model();
  const auto grid = build_density_grid(model, square(-5, 5), {50, 50});
  std::vector<double> masses(grid.num_cells());
  for (std::size_t i = 0; i < masses.size(); ++i) masses[i] = grid.mass(i);
  std::mt19937_64 rng(123);
  std::discrete_distribution<std::size_t> pick(masses.begin(), masses.end());
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);
  const double w = grid.cell_width(0);
  std::vector<Vector> samples;
  samples.reserve(1000000);
  for (int i = 0; i < 1000000; ++i) {
    Vector z = grid.cell_center(pick(rng));
    z(0) += jitter(rng) * w;
    z(1) += jitter(rng) * w;
    samples.push_back(std::move(z));
  }
  EXPECT_LE(tv_distance(grid, samples), 0.02);
}

TEST(TvDistance, Errors) {
  const auto grid = build_density_grid(MetricModel::constant(2, 1.0), square(0, 1), {8, 8});
  EXPECT_THROW(tv_distance(grid, std::vector<Vector>{}), ValidationError);
  EXPECT_THROW(tv_distance(grid, std::vector<Vector>{vec({0.5})}), DimensionError);
}

TEST(DefaultBox, PadsCentroidBoundingBox) {
  const auto box = default_box(geosampler::testing::two_centroid_model());
  EXPECT_TRUE(box.lower.isApprox(vec({-5.0, -4.0}), 1e-15));
  EXPECT_TRUE(box.upper.isApprox(vec({5.0, 4.0}), 1e-15));
  const auto flat = default_box(MetricModel::constant(2, 1.0));
  EXPECT_TRUE(flat.upper.isApprox(vec({5.0, 5.0}), 1e-15));
}
