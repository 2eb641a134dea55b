#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "geosampler/geodesics.hpp"
#include "test_support.hpp"

using namespace geosampler;
using geosampler::testing::vec;

namespace {

double fd_hamiltonian(const MetricModel& model, PhaseState s, bool wrt_position, Eigen::Index k,
                      double h) {
  Vector& x = wrt_position ? s.position : s.momentum;
  const double x0 = x(k);
  x(k) = x0 + h;
  const double up = hamiltonian(model, s);
  x(k) = x0 - h;
  const double down = hamiltonian(model, s);
  return (up - down) / (2.0 * h);
}

IntegratorConfig steps(std::size_t n, bool record = false) {
  IntegratorConfig cfg;
  cfg.n_steps = n;
  cfg.record_path = record;
  return cfg;
}

}  // namespace

TEST(Hamiltonian, ZeroMomentumAndEuclideanCase) {
  const auto model = geosampler::testing::single_centroid_model();
  EXPECT_EQ(hamiltonian(model, {vec({0.3, 0.1}), vec({0.0, 0.0})}), 0.0);
  EXPECT_DOUBLE_EQ(hamiltonian(MetricModel::constant(2, 1.0), {vec({1, 2}), vec({3, 4})}), 12.5);
}

TEST(Hamiltonian, MatchesExplicitQuadraticForm) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto model = geosampler::testing::random_model(rng, 3, 3);
    const Vector p = geosampler::testing::random_point_near(rng, model);
    const Vector q = geosampler::testing::random_vector(rng, 3, -2.0, 2.0);
    // Oracle: assemble G⁻¹ entry by entry from the RBF definition.
    Matrix g_inv = model.regularization() * Matrix::Identity(3, 3);
    for (std::size_t i = 0; i < model.num_centroids(); ++i) {
      const double w = std::exp(-(p - model.centroids()[i]).squaredNorm() /
                                 (model.temperature() * model.temperature()));
      g_inv += w * model.factors()[i] * model.factors()[i].transpose();
    }
    double expected = 0.0;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) expected += 0.5 * q(r) * g_inv(r, c) * q(c);
    }
    EXPECT_NEAR(hamiltonian(model, {p, q}), expected, 1e-12 * std::max(1.0, expected));
  }
}

TEST(HamiltonianGrads, DegenerateCases) {
  const auto flat = MetricModel::constant(2, 0.3);
  const auto g = hamiltonian_grads(flat, {vec({1, 1}), vec({2, -1})});
  EXPECT_TRUE(g.grad_position.isZero(0.0));
  EXPECT_TRUE(g.grad_momentum.isApprox(0.3 * vec({2, -1}), 1e-15));

  const auto model = geosampler::testing::single_centroid_model();
  const auto z = hamiltonian_grads(model, {vec({0.4, 0.2}), vec({0, 0})});
  EXPECT_TRUE(z.grad_position.isZero(0.0));
  EXPECT_TRUE(z.grad_momentum.isZero(0.0));
}

TEST(HamiltonianGrads, MatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  constexpr double h = 1e-5;
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t d = 2 + static_cast<std::size_t>(trial % 2);
    const auto model = geosampler::testing::random_model(rng, d, 2);
    const PhaseState s{geosampler::testing::random_point_near(rng, model),
                       geosampler::testing::random_vector(rng, static_cast<Eigen::Index>(d), -1, 1)};
    const auto g = hamiltonian_grads(model, s);
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(d); ++k) {
      EXPECT_NEAR(g.grad_position(k), fd_hamiltonian(model, s, true, k, h), 1e-6);
      EXPECT_NEAR(g.grad_momentum(k), fd_hamiltonian(model, s, false, k, h), 1e-6);
    }
  }
}

TEST(HamiltonianGrads, AgreesWithMetricInverseGradientRoute) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const auto model = geosampler::testing::random_model(rng, 3, 3);
    const PhaseState s{geosampler::testing::random_point_near(rng, model),
                       geosampler::testing::random_vector(rng, 3, -1, 1)};
    const auto g = hamiltonian_grads(model, s);
    const auto dg = grad_metric_inverse(model, s.position);
    for (Eigen::Index k = 0; k < 3; ++k) {
      const double expected = 0.5 * s.momentum.dot(dg[static_cast<std::size_t>(k)] * s.momentum);
      EXPECT_NEAR(g.grad_position(k), expected, 1e-13 * std::max(1.0, std::abs(expected)));
    }
    const Vector gq = metric_inverse(model, s.position).entries() * s.momentum;
    EXPECT_TRUE(g.grad_momentum.isApprox(gq, 1e-13));
  }
}

TEST(ExpMap, ZeroVelocityStaysPut) {
  const auto model = geosampler::testing::single_centroid_model();
  const Vector z0 = vec({0.4, -0.3});
  const auto path = exp_map(model, z0, vec({0, 0}), steps(16, true));
  ASSERT_EQ(path.points.size(), 17u);
  for (const auto& p : path.points) EXPECT_TRUE(p == z0);
  EXPECT_TRUE(path.endpoint == z0);
}

TEST(ExpMap, ConstantMetricGivesStraightLines) {
  std::mt19937_64 rng(1);
  for (std::size_t n : {1u, 3u, 10u, 100u}) {
    for (int trial = 0; trial < 25; ++trial) {
      const double lambda = std::pow(10.0, std::uniform_real_distribution<double>(-3, 1)(rng));
      const auto model = MetricModel::constant(2, lambda);
      const Vector z0 = geosampler::testing::random_vector(rng, 2, -3, 3);
      const Vector v = geosampler::testing::random_vector(rng, 2, -2, 2);
      const auto path = exp_map(model, z0, v, steps(n));
      EXPECT_LT((path.endpoint - (z0 + v)).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(ExpMap, PathRecordingKeepsEndpoints) {
  const auto model = geosampler::testing::single_centroid_model();
  const Vector z0 = vec({0.5, 0.5}), v = vec({0.3, -0.2});
  const auto full = exp_map(model, z0, v, steps(20, true));
  const auto ends = exp_map(model, z0, v, steps(20, false));
  ASSERT_EQ(full.points.size(), 21u);
  ASSERT_EQ(ends.points.size(), 2u);
  EXPECT_TRUE(full.points.front() == z0);
  EXPECT_TRUE(full.points.back() == full.endpoint);
  EXPECT_TRUE(full.endpoint == ends.endpoint);
  EXPECT_TRUE(full.initial_velocity == v);
}

TEST(ExpMap, SecondOrderSelfConvergence) {
  const auto model = geosampler::testing::single_centroid_model();
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector z0 = geosampler::testing::random_point_near(rng, model);
    const Vector v = 0.1 * geosampler::testing::random_vector(rng, 2, -1, 1).normalized();
    const Vector ref = exp_map(model, z0, v, steps(1024)).endpoint;
    const double e16 = (exp_map(model, z0, v, steps(16)).endpoint - ref).norm();
    const double e32 = (exp_map(model, z0, v, steps(32)).endpoint - ref).norm();
    const double e64 = (exp_map(model, z0, v, steps(64)).endpoint - ref).norm();
    EXPECT_GE(e16 / e32, 3.0) << "trial " << trial;
    EXPECT_LE(e16 / e32, 5.0) << "trial " << trial;
    EXPECT_GE(e32 / e64, 3.0) << "trial " << trial;
    EXPECT_LE(e32 / e64, 5.0) << "trial " << trial;
  }
}

TEST(ExpMap, EnergyDriftIsSecondOrder) {
  // A trajectory whose leading h² drift coefficient vanishes shows a sign
  // change in the drift between resolutions; the per-case ratio is only
  // meaningful without one. The pooled ratio covers every case.
  std::mt19937_64 rng(41);
  double pooled32 = 0.0, pooled64 = 0.0;
  int sign_changes = 0;
  for (int trial = 0; trial < 24; ++trial) {
    const auto model = geosampler::testing::random_model(rng, 2, 2);
    const Vector z0 = geosampler::testing::random_point_near(rng, model);
    const Vector v = 0.5 * geosampler::testing::random_vector(rng, 2, -1, 1).normalized();
    const Vector q0 = metric(model, z0).entries() * v;
    const double h0 = hamiltonian(model, {z0, q0});
    auto drift = [&](std::size_t n) {
      const auto path = exp_map(model, z0, v, steps(n));
      return (hamiltonian(model, path.final_state) - h0) / std::max(h0, 1e-12);
    };
    const double d32 = drift(32), d64 = drift(64);
    pooled32 += std::abs(d32);
    pooled64 += std::abs(d64);
    if (d32 * d64 <= 0.0) {
      ++sign_changes;
      continue;
    }
    const double ratio = d32 / d64;
    EXPECT_GE(ratio, 3.0) << "trial " << trial;
    EXPECT_LE(ratio, 5.0) << "trial " << trial;
  }
  EXPECT_LE(sign_changes, 2);
  EXPECT_GE(pooled32 / pooled64, 3.0);
  EXPECT_LE(pooled32 / pooled64, 5.0);
}

TEST(ExpMap, BackIntegrationReturnsToStart) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    const auto model = geosampler::testing::random_model(rng, 2, 2);
    const Vector z0 = geosampler::testing::random_point_near(rng, model);
    const double speed = std::uniform_real_distribution<double>(0.05, 0.5)(rng);
    const Vector v = speed * geosampler::testing::random_vector(rng, 2, -1, 1).normalized();
    const auto fwd = exp_map(model, z0, v, steps(64));
    const auto back = integrate_geodesic(
        model, {fwd.final_state.position, -fwd.final_state.momentum}, steps(64));
    EXPECT_LT((back.endpoint - z0).norm(), 1e-6) << "trial " << trial << " |v| " << speed;
  }
}

TEST(ExpMap, SmallVelocityLinearization) {
  const auto model = geosampler::testing::single_centroid_model();
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector z0 = geosampler::testing::random_point_near(rng, model);
    const Vector dir = geosampler::testing::random_vector(rng, 2, -1, 1).normalized();
    auto deviation = [&](double s) {
      const Vector v = s * dir;
      return (exp_map(model, z0, v, steps(64)).endpoint - (z0 + v)).norm();
    };
    const double ratio = deviation(0.1) / deviation(0.05);
    EXPECT_GT(ratio, 3.5) << "trial " << trial;
    EXPECT_LT(ratio, 4.5) << "trial " << trial;
  }
}

TEST(ExpMap, Deterministic) {
  std::mt19937_64 rng(53);
  const auto model = geosampler::testing::random_model(rng, 3, 3);
  const Vector z0 = geosampler::testing::random_point_near(rng, model);
  const Vector v = geosampler::testing::random_vector(rng, 3, -0.5, 0.5);
  const auto a = exp_map(model, z0, v, steps(50, true));
  const auto b = exp_map(model, z0, v, steps(50, true));
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    EXPECT_EQ(std::memcmp(a.points[i].data(), b.points[i].data(), 3 * sizeof(double)), 0);
  }
}

TEST(ExpMap, NonFiniteStateIsAnError) {
  const auto model = geosampler::testing::single_centroid_model();
  const double huge = std::numeric_limits<double>::max();
  EXPECT_THROW(exp_map(model, vec({0.1, 0.1}), vec({huge, huge}), steps(4)), IntegrationError);
  EXPECT_THROW(exp_map(model, vec({0.1, 0.1}), vec({std::nan(""), 0}), steps(4)),
               IntegrationError);
  EXPECT_THROW(exp_map(model, vec({0.1}), vec({0.1, 0.1}), steps(4)), DimensionError);
  EXPECT_THROW(exp_map(model, vec({0.1, 0.1}), vec({0.1, 0.1}), steps(0)), ValidationError);
}

TEST(CurveLength, DegenerateAndEuclidean) {
  const auto flat = MetricModel::constant(2, 1.0);
  GeodesicPath constant_path;
  constant_path.points.assign(5, vec({1.0, 1.0}));
  EXPECT_EQ(curve_length(geosampler::testing::single_centroid_model(), constant_path), 0.0);

  for (std::size_t n : {1u, 7u, 64u}) {
    GeodesicPath line;
    for (std::size_t i = 0; i <= n; ++i) {
      const double t = static_cast<double>(i) / static_cast<double>(n);
      line.points.push_back(vec({3.0 * t, 4.0 * t}));
    }
    EXPECT_NEAR(curve_length(flat, line), 5.0, 1e-12);
  }

  GeodesicPath single;
  single.points.push_back(vec({0, 0}));
  EXPECT_THROW(curve_length(flat, single), ValidationError);
}

TEST(CurveLength, GeodesicsHaveInitialSpeedLength) {
  const auto model = geosampler::testing::single_centroid_model();
  std::mt19937_64 rng(59);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector z0 = geosampler::testing::random_point_near(rng, model);
    const Vector v = 0.05 * geosampler::testing::random_vector(rng, 2, -1, 1).normalized();
    const auto path = exp_map(model, z0, v, steps(100, true));
    const double speed = std::sqrt(v.dot(metric(model, z0).entries() * v));
    EXPECT_NEAR(curve_length(model, path), speed, 0.01 * speed);
  }
}
