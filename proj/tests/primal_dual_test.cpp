#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "rotavg/cycle.hpp"
#include "rotavg/primal_dual.hpp"
#include "test_support.hpp"

namespace rotavg {
namespace {

using testing::dense_pairwise;
using testing::max_relative_error;
using testing::random_cycle_graph;
using testing::random_graph;
using testing::random_rotation;

constexpr int kPropertyCases = 150;

// -Tr(R^T R~ R) with a dense R~.
double dense_cost(const MeasurementGraph& g, const BlockVector& r) {
  const StackedBlocks& x = r.stacked();
  return -(x.transpose() * dense_pairwise(g) * x).trace();
}

BlockVector random_rotations(std::mt19937_64& gen, Index n) {
  BlockVector r(n);
  for (Index i = 0; i < n; ++i) r.block(i) = random_rotation(gen).matrix();
  return r;
}

bool is_rotation(const Eigen::Ref<const Matrix3>& m, double tol) {
  return orthogonality_error(m) <= tol && std::abs(m.determinant() - 1.0) <= tol;
}

TEST(Cost, NoiseFreeCycleAtGroundTruth) {
  std::mt19937_64 gen(1);
  for (Index n : {3, 10, 57}) {
    std::vector<Rotation> truth;
    const MeasurementGraph g = random_cycle_graph(gen, n, 0.0, &truth);
    EXPECT_NEAR(cost(g, BlockVector::from_rotations(truth)), -9.0 * n, 1e-10);
  }
}

TEST(Cost, MatchesDenseTraceFormula) {
  std::mt19937_64 gen(2);
  const MeasurementGraph three = random_graph(gen, 3, 1.0, 0.4);
  const BlockVector r3 = random_rotations(gen, 3);
  EXPECT_NEAR(cost(three, r3), dense_cost(three, r3), 1e-10);

  std::uniform_int_distribution<int> size(2, 40);
  std::uniform_real_distribution<double> density(0.0, 0.6);
  for (int trial = 0; trial < kPropertyCases; ++trial) {
    const Index n = size(gen);
    const MeasurementGraph g = random_graph(gen, n, density(gen), 0.5);
    const BlockVector r = random_rotations(gen, n);
    ASSERT_NEAR(cost(g, r), dense_cost(g, r), 1e-9);
  }
}

TEST(Cost, DimensionMismatch) {
  std::mt19937_64 gen(3);
  const MeasurementGraph g = random_cycle_graph(gen, 5, 0.1);
  EXPECT_THROW(cost(g, BlockVector(4)), Error);
  EXPECT_THROW(kkt_multiplier(g, BlockVector(6)), Error);
}

TEST(DualUpdate, NoiseFreeGivesDegreeMultiplier) {
  std::mt19937_64 gen(4);
  std::vector<Rotation> truth;
  const MeasurementGraph g = random_graph(gen, 30, 0.2, 0.0, &truth);
  const BlockDiagonal lambda = dual_update(g, BlockVector::from_rotations(truth));
  const BlockDiagonal nf = lambda_noise_free(g);
  for (Index i = 0; i < g.node_count(); ++i) {
    EXPECT_LT((lambda[i] - nf[i]).cwiseAbs().maxCoeff(), 1e-12) << "node " << i;
  }
}

TEST(DualUpdate, SingleEdgeIsSymmetric) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 100; ++trial) {
    MeasurementGraph g(2);
    g.add_edge(0, 1, random_rotation(gen));
    const BlockDiagonal lambda = dual_update(g, random_rotations(gen, 2));
    ASSERT_LE(lambda.asymmetry(), 1e-15);
  }
}

TEST(DualUpdate, SymmetricOnRandomInstances) {
  std::mt19937_64 gen(6);
  std::uniform_int_distribution<int> size(2, 60);
  for (int trial = 0; trial < kPropertyCases; ++trial) {
    const Index n = size(gen);
    const MeasurementGraph g = random_graph(gen, n, 0.3, 0.7);
    const BlockVector r = random_rotations(gen, n);
    const BlockDiagonal a = dual_update(g, r);
    const BlockDiagonal b = kkt_multiplier(g, r);
    ASSERT_LE(a.asymmetry(), 1e-14);
    for (Index i = 0; i < n; ++i) ASSERT_EQ(a[i], b[i]);
  }
}

TEST(DualUpdate, StationaryAtCycleOptimum) {
  std::mt19937_64 gen(7);
  const MeasurementGraph g = random_cycle_graph(gen, 25, 0.3);
  const CycleSolution s = solve_cycle(cycle_from_graph(g).problem);
  const BlockDiagonal lambda = dual_update(g, s.rotations);
  const double residual = matvec(lambda, build_pairwise_matrix(g), s.rotations.stacked()).norm();
  EXPECT_LT(residual, 1e-9);
}

TEST(PrimalUpdate, NoiseFreeRecoversGroundTruth) {
  std::mt19937_64 gen(8);
  for (Index n : {12, 40, 90}) {
    std::vector<Rotation> truth;
    const MeasurementGraph g = random_cycle_graph(gen, n, 0.0, &truth);
    const PrimalStep step = primal_update(build_pairwise_matrix(g), lambda_noise_free(g));
    EXPECT_LT(max_relative_error(step.rotations.rotations(), truth), 1e-9);
    EXPECT_EQ(step.rotations.block(0), Matrix3::Identity());
    EXPECT_FALSE(step.gauge_fallback);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(step.lambdas[i], 0.0, 1e-12);
  }
}

TEST(PrimalUpdate, SingleNode) {
  const MeasurementGraph g(1);
  const PrimalStep step = primal_update(build_pairwise_matrix(g), lambda_noise_free(g));
  ASSERT_EQ(step.rotations.size(), 1);
  EXPECT_EQ(step.rotations.block(0), Matrix3::Identity());
}

TEST(PrimalUpdate, IteratesAreRotationsWithExactAnchor) {
  std::mt19937_64 gen(9);
  const MeasurementGraph five = random_graph(gen, 5, 0.5, 0.3);
  const PrimalStep first = primal_update(build_pairwise_matrix(five), lambda_noise_free(five));
  for (Index i = 0; i < 5; ++i) EXPECT_TRUE(is_rotation(first.rotations.block(i), 1e-10));

  std::uniform_int_distribution<int> size(2, 80);
  std::uniform_real_distribution<double> noise(0.0, 1.0);
  for (int trial = 0; trial < kPropertyCases; ++trial) {
    const Index n = size(gen);
    const MeasurementGraph g = random_graph(gen, n, 0.15, noise(gen));
    const PairwiseMatrix m = build_pairwise_matrix(g);
    BlockDiagonal dual = lambda_noise_free(g);
    // two primal steps: from the initial dual and from an updated one
    for (int step = 0; step < 2; ++step) {
      const PrimalStep p = primal_update(m, dual);
      ASSERT_EQ(p.rotations.block(0), Matrix3::Identity());
      for (Index i = 0; i < n; ++i) ASSERT_TRUE(is_rotation(p.rotations.block(i), 1e-10));
      dual = dual_update(g, p.rotations);
    }
  }
}

TEST(PrimalUpdate, NearSingularAnchorBlockFallsBack) {
  std::mt19937_64 gen(10);
  const MeasurementGraph g = random_graph(gen, 40, 0.2, 0.1);
  BlockDiagonal dual = lambda_noise_free(g);
  // a huge multiplier on node 0 pushes the bottom eigenvectors off that node
  dual[0] = 1e12 * Matrix3::Identity();
  const PrimalStep p = primal_update(build_pairwise_matrix(g), dual);
  EXPECT_TRUE(p.gauge_fallback);
  EXPECT_EQ(p.rotations.block(0), Matrix3::Identity());
  for (Index i = 0; i < g.node_count(); ++i) EXPECT_TRUE(is_rotation(p.rotations.block(i), 1e-10));
}

TEST(Certify, NoiseFreeGroundTruth) {
  std::mt19937_64 gen(11);
  std::vector<Rotation> truth;
  const MeasurementGraph g = random_cycle_graph(gen, 30, 0.0, &truth);
  const Certificate c = certify(build_pairwise_matrix(g), BlockVector::from_rotations(truth),
                                lambda_noise_free(g), 1e-8);
  EXPECT_NEAR(c.min_eigenvalue, 0.0, 1e-10);
  EXPECT_NEAR(c.stationarity_residual, 0.0, 1e-12);
  EXPECT_TRUE(c.certified);
}

TEST(Certify, RejectsSuboptimalStationaryPoint) {
  std::mt19937_64 gen(12);
  const MeasurementGraph g = random_cycle_graph(gen, 12, 0.2);
  const GraphCycle cycle = cycle_from_graph(g);
  const CycleSolution s = stationary_point(cycle.problem, 1);
  const BlockVector r = in_graph_order(s.rotations, cycle.order);
  const Certificate c = certify(build_pairwise_matrix(g), r, kkt_multiplier(g, r), 1e-8);
  EXPECT_LT(c.min_eigenvalue, -1e-6);
  EXPECT_LT(c.stationarity_residual, 1e-8);
  EXPECT_FALSE(c.certified);
}

TEST(Certify, RejectsCorruptedSolution) {
  std::mt19937_64 gen(13);
  const MeasurementGraph g = random_graph(gen, 30, 0.2, 0.1);
  const SolveReport report = solve(g);
  ASSERT_TRUE(report.certified);
  BlockVector r = report.rotations;
  r.block(7) = random_rotation(gen).matrix();
  const Certificate c = certify(build_pairwise_matrix(g), r, kkt_multiplier(g, r), 1e-8);
  EXPECT_LT(c.min_eigenvalue, -1e-6);
  EXPECT_FALSE(c.certified);
}

TEST(Solve, NoiseFreeCycleInOneIteration) {
  std::mt19937_64 gen(14);
  std::vector<Rotation> truth;
  const MeasurementGraph g = random_cycle_graph(gen, 10, 0.0, &truth);
  const SolveReport r = solve(g);
  EXPECT_TRUE(r.certified);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_NEAR(r.final_cost, -90.0, 1e-9);
  EXPECT_LT(max_relative_error(r.rotations.rotations(), truth), 1e-9);
  ASSERT_EQ(r.min_eigenvalue_history.size(), 1u);
  EXPECT_LE(r.min_eigenvalue_history.back(), SolverConfig{}.epsilon);
}

TEST(Solve, MatchesClosedFormOnNoisyCycle) {
  std::mt19937_64 gen(15);
  const MeasurementGraph g = random_cycle_graph(gen, 20, 0.2);
  const SolveReport r = solve(g);
  const CycleSolution s = solve_cycle(cycle_from_graph(g).problem);
  EXPECT_TRUE(r.certified);
  EXPECT_NEAR(r.final_cost, s.cost, 1e-6);
}

TEST(Solve, RejectsBadInput) {
  MeasurementGraph disconnected(4);
  disconnected.add_edge(0, 1, Rotation::identity());
  disconnected.add_edge(2, 3, Rotation::identity());
  try {
    solve(disconnected);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
  }
  EXPECT_THROW(solve(MeasurementGraph(1)), Error);

  std::mt19937_64 gen(16);
  const MeasurementGraph g = random_cycle_graph(gen, 5, 0.1);
  SolverConfig bad;
  bad.epsilon = 0.0;
  EXPECT_THROW(solve(g, bad), Error);
  bad = {};
  bad.max_iterations = 0;
  EXPECT_THROW(solve(g, bad), Error);
}

TEST(Solve, IterationLimitIsReportedNotThrown) {
  std::mt19937_64 gen(17);
  const MeasurementGraph g = random_graph(gen, 60, 0.1, 0.5);
  SolverConfig cfg;
  cfg.max_iterations = 1;
  const SolveReport r = solve(g, cfg);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_FALSE(r.converged);
  EXPECT_FALSE(r.certified);
  EXPECT_EQ(r.rotations.size(), 60);
}

TEST(Solve, RelativeEpsilonStopsNoLater) {
  std::mt19937_64 gen(18);
  const MeasurementGraph g = random_graph(gen, 50, 0.15, 0.3);
  SolverConfig relative;
  relative.epsilon = 1e-12;
  relative.relative_epsilon = true;
  SolverConfig absolute;
  absolute.epsilon = 1e-12;
  const SolveReport a = solve(g, absolute);
  const SolveReport b = solve(g, relative);
  EXPECT_LE(b.iterations, a.iterations);
  EXPECT_TRUE(b.converged);
}

TEST(Solve, TraceRecordsEveryIteration) {
  std::mt19937_64 gen(19);
  const MeasurementGraph g = random_graph(gen, 40, 0.2, 0.4);
  const SolveReport r = solve(g);
  ASSERT_EQ(r.trace.size(), static_cast<std::size_t>(r.iterations));
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    EXPECT_EQ(r.trace[i].iteration, static_cast<int>(i) + 1);
    EXPECT_EQ(r.trace[i].min_abs_lambda, r.min_eigenvalue_history[i]);
    if (i > 0) {
      EXPECT_GE(r.trace[i].wall_ms, r.trace[i - 1].wall_ms);
    }
  }
  EXPECT_DOUBLE_EQ(r.trace.back().cost, r.final_cost);
}

TEST(Solve, NoisyShortCyclesCertify) {
  std::mt19937_64 gen(22);
  for (Index n : {3, 4, 5, 8}) {
    for (int trial = 0; trial < 20; ++trial) {
      const MeasurementGraph g = random_cycle_graph(gen, n, 0.3);
      const SolveReport r = solve(g);
      ASSERT_TRUE(r.certified) << "n " << n << " trial " << trial;
      ASSERT_NEAR(r.final_cost, solve_cycle(cycle_from_graph(g).problem).cost, 1e-6);
    }
  }
}

// Certificate soundness, anchor, feasibility and first-vs-last trend over
// random instances.
TEST(Solve, PropertiesOnRandomGraphs) {
  std::mt19937_64 gen(20);
  std::uniform_int_distribution<int> size(5, 60);
  std::uniform_real_distribution<double> density(0.05, 0.5);
  std::uniform_real_distribution<double> noise(0.0, 0.3);
  int certified = 0;
  for (int trial = 0; trial < kPropertyCases; ++trial) {
    const Index n = size(gen);
    const MeasurementGraph g = random_graph(gen, n, density(gen), noise(gen));
    const SolveReport r = solve(g);
    ASSERT_EQ(r.rotations.block(0), Matrix3::Identity());
    for (Index i = 0; i < n; ++i) ASSERT_TRUE(is_rotation(r.rotations.block(i), 1e-10));
    ASSERT_LE(r.multiplier.asymmetry(), 1e-14);
    ASSERT_NEAR(r.final_cost, dense_cost(g, r.rotations), 1e-9);
    ASSERT_LE(r.min_eigenvalue_history.back(),
              std::max(r.min_eigenvalue_history.front(), SolverConfig{}.epsilon));
    if (r.certified) {
      ++certified;
      ASSERT_LE(r.min_eigenvalue_history.back(), SolverConfig{}.epsilon);
      const Certificate again = certify(build_pairwise_matrix(g), r.rotations,
                                        kkt_multiplier(g, r.rotations), 1e-8);
      ASSERT_TRUE(again.certified) << "trial " << trial;
    }
  }
  EXPECT_EQ(certified, kPropertyCases);
}

TEST(PrincipalAngle, IdenticalAndOrthogonal) {
  const Eigen::MatrixXd a = Eigen::MatrixXd::Random(30, 3).householderQr().householderQ() *
                            Eigen::MatrixXd::Identity(30, 3);
  EXPECT_NEAR(principal_angle_cosine(a, a), 1.0, 1e-14);

  Eigen::MatrixXd top = Eigen::MatrixXd::Zero(12, 3);
  Eigen::MatrixXd bottom = Eigen::MatrixXd::Zero(12, 3);
  top.topRows<3>() = Eigen::Matrix3d::Identity();
  bottom.bottomRows<3>() = Eigen::Matrix3d::Identity();
  EXPECT_EQ(principal_angle_cosine(top, bottom), 0.0);
}

TEST(PrincipalAngle, InvariantUnderInSubspaceRotation) {
  std::mt19937_64 gen(22);
  std::vector<Rotation> truth;
  const MeasurementGraph g = random_cycle_graph(gen, 4, 0.0, &truth);
  const Eigen::MatrixXd kernel = BlockVector::from_rotations(truth).stacked() / 2.0;
  const Eigen::MatrixXd rotated = kernel * random_rotation(gen).matrix();
  EXPECT_NEAR(principal_angle_cosine(kernel, rotated), 1.0, 1e-12);
}

TEST(PrincipalAngle, RejectsNonOrthonormal) {
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(9, 3);
  EXPECT_THROW(principal_angle_cosine(2.0 * a, a), Error);
  EXPECT_THROW(principal_angle_cosine(a, Eigen::MatrixXd::Identity(12, 3)), Error);
}

}  // namespace
}  // namespace rotavg
