#include <random>

#include <gtest/gtest.h>

#include "affine_swarm/frameworks.hpp"
#include "affine_swarm/presets.hpp"
#include "affine_swarm/stress.hpp"

namespace affine_swarm {
namespace {

MatrixXd points(std::initializer_list<std::pair<double, double>> pts) {
  MatrixXd p(2, static_cast<Eigen::Index>(pts.size()));
  int i = 0;
  for (const auto& [x, y] : pts) {
    p(0, i) = x;
    p(1, i++) = y;
  }
  return p;
}

TEST(TargetConfiguration, Examples) {
  const Configuration p(points({{0, 0}, {1, 0}, {0, 1}}));
  EXPECT_EQ(target_configuration(p, AffineTransform::identity(2)).points, p.points);
  AffineTransform s{2.0 * MatrixXd::Identity(2, 2), VectorXd::Zero(2)};
  EXPECT_EQ(target_configuration(p, s).points, points({{0, 0}, {2, 0}, {0, 2}}));
  AffineTransform r{rotation2d(std::numbers::pi / 2), Eigen::Vector2d(1, 0)};
  const MatrixXd z = target_configuration(Configuration(points({{1, 0}})), r).points;
  EXPECT_NEAR(z(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(z(1, 0), 1.0, 1e-15);
  AffineTransform bad{MatrixXd::Identity(3, 3), VectorXd::Zero(3)};
  EXPECT_THROW(target_configuration(p, bad), ConfigError);
}

TEST(Trajectory, EndpointsAndMidpoint) {
  AffineTransform two{2.0 * MatrixXd::Identity(2, 2), VectorXd::Zero(2)};
  const TrajectorySpec spec(AffineTransform::identity(2), {{10.0, two, Interpolation::kLinear}});
  EXPECT_EQ(spec.evaluate(0.0).theta, MatrixXd::Identity(2, 2));
  EXPECT_LT((spec.evaluate(5.0).theta - 1.5 * MatrixXd::Identity(2, 2)).norm(), 1e-15);
  EXPECT_EQ(spec.evaluate(10.0).theta, two.theta);
  EXPECT_THROW(spec.evaluate(10.5), ConfigError);
  EXPECT_THROW(spec.evaluate(-0.1), ConfigError);
}

TEST(Trajectory, GeodesicInterpolatesTheAngle) {
  const TrajectorySpec spec(AffineTransform::identity(2),
                            {{4.0, planar_transform(1, std::numbers::pi / 2, 0, 0), Interpolation::kRotationGeodesic}});
  const MatrixXd mid = spec.evaluate(2.0).theta;
  EXPECT_LT((mid - rotation2d(std::numbers::pi / 4)).norm(), 1e-12);
  // linear blending of the same endpoints shrinks the matrix instead
  const TrajectorySpec lin(AffineTransform::identity(2),
                           {{4.0, planar_transform(1, std::numbers::pi / 2, 0, 0), Interpolation::kLinear}});
  EXPECT_NEAR(lin.evaluate(2.0).theta.determinant(), 0.5, 1e-12);
}

TEST(Trajectory, ContinuousAcrossSegmentBoundaries) {
  const TrajectorySpec spec = maneuver_trajectory();
  const Configuration p = graph1().nominal;
  double t = 0.0;
  for (std::size_t n = 0; n + 1 < spec.segments().size(); ++n) {
    t += spec.segments()[n].duration;
    const AffineTransform end = spec.evaluate_segment(n, 1.0);
    const AffineTransform start = spec.evaluate_segment(n + 1, 0.0);
    EXPECT_EQ(end.theta, start.theta);
    EXPECT_EQ(end.translation, start.translation);
    const MatrixXd a = target_configuration(p, spec.evaluate(t - 1e-6)).points;
    const MatrixXd b = target_configuration(p, spec.evaluate(t + 1e-6)).points;
    EXPECT_LT((a - b).norm(), 1e-4);
  }
  EXPECT_DOUBLE_EQ(spec.horizon(), 60.0);
}

TEST(GeometricFeasibility, RemarkExamples) {
  const Configuration p(points({{0, 0}, {1, 0}, {2, 0}, {0, 1}}));
  auto block = [](std::initializer_list<int> nbrs) {
    MatrixXd b = MatrixXd::Zero(4, static_cast<Eigen::Index>(nbrs.size()));
    int c = 0;
    for (int j : nbrs) {
      b(0, c) = 1;
      b(j, c++) = -1;
    }
    return b;
  };
  EXPECT_FALSE(check_geometric_feasibility(p, block({1})));
  EXPECT_FALSE(check_geometric_feasibility(p, block({1, 2})));
  EXPECT_TRUE(check_geometric_feasibility(p, block({1, 3})));
}

TEST(GeometricFeasibility, InvariantUnderAffineReexpression) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  const NominalFramework f = graph2();
  MatrixXd a(2, 2);
  a << 2.0, 0.3, -0.7, 1.1;
  const Configuration q(a * f.nominal.points);
  for (int trial = 0; trial < 200; ++trial) {
    const FunctionalGraph fg = realize_functional(f.graph, BernoulliLosses{0.3, false}, trial, RunStream{1, 0});
    for (int i = 0; i < f.graph.n_nodes(); ++i) {
      const MatrixXd b = functional_block(fg, f.graph, i);
      EXPECT_EQ(check_geometric_feasibility(f.nominal, b), check_geometric_feasibility(q, b));
    }
  }
}

void expect_certificate(const NominalFramework& f) {
  const StressMatrix s = compute_stress(f.graph, f.nominal);
  const MatrixXd& l = s.matrix;
  const int n = f.graph.n_nodes();
  const int d = f.nominal.dim();
  EXPECT_LE((l * VectorXd::Ones(n)).norm(), 1e-10 * l.norm());
  EXPECT_LE((l * f.nominal.points.transpose()).norm(), 1e-10 * l.norm());
  EXPECT_NEAR(l.norm(), n, 1e-9 * n);
  EXPECT_LT((l - l.transpose()).norm(), 1e-14 * l.norm());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && f.graph.edge_index(i, j) < 0) EXPECT_EQ(l(i, j), 0.0);
  // independent spectrum
  Eigen::EigenSolver<MatrixXd> es(l);
  std::vector<double> ev;
  for (int k = 0; k < n; ++k) ev.push_back(es.eigenvalues()(k).real());
  std::sort(ev.begin(), ev.end());
  for (int k = 0; k <= d; ++k) EXPECT_LT(std::abs(ev[k]), 1e-8) << k;
  for (int k = d + 1; k < n; ++k) EXPECT_GT(ev[k], 1e-3) << k;
}

TEST(ComputeStress, Graph1Certificate) { expect_certificate(graph1()); }
TEST(ComputeStress, Graph2Certificate) { expect_certificate(graph2()); }

TEST(ComputeStress, QuadraticFormSpotCheck) {
  const NominalFramework f = graph1();
  const MatrixXd l = compute_stress(f.graph, f.nominal).matrix;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 1000; ++t) {
    MatrixXd x(2, 7);
    for (int k = 0; k < 14; ++k) x.data()[k] = nd(rng);
    EXPECT_GE((x * l * x.transpose()).trace(), -1e-12);
  }
  AffineTransform a{MatrixXd::Random(2, 2), VectorXd::Random(2)};
  const MatrixXd z = target_configuration(f.nominal, a).points;
  EXPECT_LT(std::abs((z * l * z.transpose()).trace()), 1e-10);
}

TEST(ComputeStress, NoRandomCombinationBeatsTheSelection) {
  // Oracle: sample random equilibrium stresses from an independent null-space
  // computation and compare their normalized lambda_{D+2}. The ascent is
  // local, so a 0.2% margin is allowed.
  const NominalFramework f = graph2();
  const MatrixXd l = compute_stress(f.graph, f.nominal).matrix;
  auto score = [](const MatrixXd& m) {
    const MatrixXd u = m / m.norm();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(u);
    return std::min(es.eigenvalues()(3), es.eigenvalues()(0) < -1e-9 ? -1.0 : 1e9);
  };
  const double ours = score(l);
  const auto pairs = f.graph.undirected_edges();
  MatrixXd eq = MatrixXd::Zero(20, static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t e = 0; e < pairs.size(); ++e) {
    const VectorXd pij = f.nominal.relative(pairs[e].first, pairs[e].second);
    eq.block(2 * pairs[e].first, e, 2, 1) += pij;
    eq.block(2 * pairs[e].second, e, 2, 1) -= pij;
  }
  const MatrixXd ker = Eigen::FullPivLU<MatrixXd>(eq).kernel();
  VectorXd w_ours(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t e = 0; e < pairs.size(); ++e) w_ours(static_cast<Eigen::Index>(e)) = -l(pairs[e].first, pairs[e].second);
  w_ours /= w_ours.norm();
  std::mt19937_64 rng(21);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 2000; ++t) {
    VectorXd c(ker.cols());
    for (Eigen::Index k = 0; k < c.size(); ++k) c(k) = nd(rng);
    VectorXd w = ker * c;
    w /= w.norm();
    // odd trials probe a small neighborhood of the selection, even ones the whole space
    if (t % 2) w = w_ours + 0.02 * w;
    MatrixXd m = MatrixXd::Zero(10, 10);
    for (std::size_t e = 0; e < pairs.size(); ++e) {
      const auto [i, j] = pairs[e];
      m(i, j) -= w(static_cast<Eigen::Index>(e));
      m(j, i) -= w(static_cast<Eigen::Index>(e));
      m(i, i) += w(static_cast<Eigen::Index>(e));
      m(j, j) += w(static_cast<Eigen::Index>(e));
    }
    EXPECT_LE(score(m), ours * (1.0 + 2e-3));
  }
}

TEST(ComputeStress, RejectsNonRigidGraph) {
  const NominalFramework f = non_rigid_example();
  EXPECT_THROW(compute_stress(f.graph, f.nominal), NotUniversallyRigid);
}

TEST(ComputeStress, RejectsDegenerateConfiguration) {
  const NominalGraph g(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
  const Configuration line(points({{0, 0}, {1, 0}, {2, 0}, {3, 0}}));
  EXPECT_THROW(compute_stress(g, line), NonGenericConfiguration);
}

TEST(ValidateStress, AcceptsScaledCertificateAndRejectsPerturbed) {
  const NominalFramework f = graph1();
  StressMatrix s = compute_stress(f.graph, f.nominal);
  EXPECT_TRUE(validate_stress(StressMatrix{0.3 * s.matrix}, f.graph, f.nominal).empty());
  StressMatrix neg{-s.matrix};
  EXPECT_FALSE(validate_stress(neg, f.graph, f.nominal).empty());
  StressMatrix bad = s;
  bad.matrix(0, 1) = bad.matrix(1, 0) = 0.5;  // (1,2) is not an edge
  EXPECT_FALSE(validate_stress(bad, f.graph, f.nominal).empty());
  EXPECT_FALSE(validate_stress(StressMatrix{MatrixXd::Identity(3, 3)}, f.graph, f.nominal).empty());
}

}  // namespace
}  // namespace affine_swarm
