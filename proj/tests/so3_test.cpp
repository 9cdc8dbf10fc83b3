#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "rotavg/so3.hpp"
#include "test_support.hpp"

namespace rotavg {
namespace {

using testing::random_rotation;
using testing::random_unit;

constexpr int kPropertyCases = 10000;

TEST(ExpAxisAngle, ZeroAngleIsIdentity) {
  std::mt19937_64 gen(1);
  for (int i = 0; i < 10; ++i) {
    const Rotation r = exp_axis_angle(random_unit(gen), 0.0);
    EXPECT_EQ(r.matrix(), Matrix3::Identity());
  }
}

TEST(ExpAxisAngle, QuarterTurnAboutZ) {
  const Rotation r = exp_axis_angle(Vector3::UnitZ(), kPi / 2);
  Matrix3 expected;
  expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  EXPECT_LT((r.matrix() - expected).norm(), 1e-15);
}

TEST(ExpAxisAngle, RejectsNonUnitAxis) {
  EXPECT_THROW(exp_axis_angle(Vector3(1.0, 1.0, 0.0), 0.3), Error);
  try {
    exp_axis_angle(Vector3::Zero(), 0.3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
  }
}

TEST(ExpAxisAngle, LogRoundTrip) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> angle(1e-6, kPi - 1e-6);
  double worst = 0.0;
  for (int i = 0; i < kPropertyCases; ++i) {
    const Vector3 axis = random_unit(gen);
    const double theta = angle(gen);
    const AxisAngle back = log_rotation(exp_axis_angle(axis, theta));
    worst = std::max({worst, std::abs(back.angle - theta), (back.axis - axis).norm()});
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(ExpAxisAngle, ResultIsRotation) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> angle(-10.0, 10.0);
  for (int i = 0; i < kPropertyCases; ++i) {
    const Rotation r = exp_axis_angle(random_unit(gen), angle(gen));
    ASSERT_LT(orthogonality_error(r.matrix()), 1e-12);
    ASSERT_NEAR(r.matrix().determinant(), 1.0, 1e-12);
  }
}

TEST(LogRotation, IdentityHasCanonicalAxis) {
  const AxisAngle a = log_rotation(Rotation::identity());
  EXPECT_EQ(a.angle, 0.0);
  EXPECT_EQ(a.axis, Vector3::UnitZ());
}

TEST(LogRotation, InvertsExp) {
  const AxisAngle a = log_rotation(exp_axis_angle(Vector3::UnitX(), 0.3));
  EXPECT_NEAR(a.angle, 0.3, 1e-15);
  EXPECT_LT((a.axis - Vector3::UnitX()).norm(), 1e-15);
}

TEST(LogRotation, HalfTurnCanonicalSign) {
  for (const Vector3& axis : {Vector3(0, 1, 0), Vector3(0, -1, 0)}) {
    const Rotation r = exp_axis_angle(axis, kPi);
    const AxisAngle a = log_rotation(r);
    EXPECT_NEAR(a.angle, kPi, 1e-12);
    EXPECT_LT((a.axis - Vector3::UnitY()).norm(), 1e-12);
    EXPECT_LT((exp_axis_angle(a).matrix() - r.matrix()).norm(), 1e-9);
  }
}

TEST(LogRotation, HalfTurnRandomAxes) {
  std::mt19937_64 gen(4);
  for (int i = 0; i < 1000; ++i) {
    const Vector3 axis = random_unit(gen);
    const Rotation r = exp_axis_angle(axis, kPi);
    const AxisAngle a = log_rotation(r);
    ASSERT_LT((exp_axis_angle(a).matrix() - r.matrix()).norm(), 1e-9);
    // first nonzero component positive
    const int first = std::abs(a.axis.x()) > 1e-12 ? 0 : (std::abs(a.axis.y()) > 1e-12 ? 1 : 2);
    ASSERT_GT(a.axis[first], 0.0);
  }
}

TEST(LogRotation, NearHalfTurnKeepsSign) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> offset(1e-9, 1e-3);
  for (int i = 0; i < 1000; ++i) {
    const Vector3 axis = random_unit(gen);
    const double theta = kPi - offset(gen);
    const Rotation r = exp_axis_angle(axis, theta);
    const AxisAngle a = log_rotation(r);
    ASSERT_LT((exp_axis_angle(a).matrix() - r.matrix()).norm(), 1e-9);
    ASSERT_NEAR(a.angle, theta, 1e-9);
  }
}

TEST(LogRotation, SmallAngles) {
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> exponent(-14.0, -6.0);
  for (int i = 0; i < 1000; ++i) {
    const Vector3 axis = random_unit(gen);
    const double theta = std::pow(10.0, exponent(gen));
    const AxisAngle a = log_rotation(exp_axis_angle(axis, theta));
    ASSERT_NEAR(a.angle, theta, 1e-15);
    ASSERT_LT((exp_axis_angle(a).matrix() - exp_axis_angle(axis, theta).matrix()).norm(), 1e-15);
  }
}

TEST(LogRotation, RejectsNonRotationMatrix) {
  EXPECT_THROW(log_rotation(Matrix3(2.0 * Matrix3::Identity())), Error);
  Matrix3 reflection = Matrix3::Identity();
  reflection(2, 2) = -1.0;
  EXPECT_THROW(log_rotation(reflection), Error);
}

TEST(AngleOf, Basics) {
  EXPECT_EQ(angle_of(Rotation::identity()), 0.0);
  EXPECT_NEAR(angle_of(exp_axis_angle(Vector3::UnitZ(), 0.7)), 0.7, 1e-15);
}

TEST(AngleOf, TraceIdentity) {
  std::mt19937_64 gen(7);
  for (int i = 0; i < kPropertyCases; ++i) {
    const Rotation r = random_rotation(gen);
    const double angle = angle_of(r);
    ASSERT_GE(angle, 0.0);
    ASSERT_LE(angle, kPi);
    ASSERT_LE(std::abs(r.trace()), 3.0 + 1e-12);
    ASSERT_NEAR(1.0 + 2.0 * std::cos(angle), r.trace(), 1e-12);
    // agrees with the arccos definition away from its ill-conditioned ends
    const double c = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
    if (std::abs(c) < 0.999) {
      ASSERT_NEAR(angle, std::acos(c), 1e-12);
    }
  }
}

// Brute-force oracle: compose the root n times.
Matrix3 power(const Rotation& r, int n) {
  Matrix3 p = Matrix3::Identity();
  for (int i = 0; i < n; ++i) p = p * r.matrix();
  return p;
}

TEST(NthRoots, IdentityRoots) {
  const RootSet set = nth_roots(Rotation::identity(), 5);
  ASSERT_EQ(set.roots.size(), 5u);
  EXPECT_EQ(set.roots[0].matrix(), Matrix3::Identity());
  EXPECT_EQ(set.axis, Vector3::UnitZ());
  for (int k = 0; k < 5; ++k) {
    const Rotation expected = exp_axis_angle(Vector3::UnitZ(), -2.0 * k * kPi / 5);
    EXPECT_LT((set.roots[k].matrix() - expected.matrix()).norm(), 1e-15);
  }
}

TEST(NthRoots, DividesAngle) {
  const RootSet set = nth_roots(exp_axis_angle(Vector3::UnitX(), 0.9), 3);
  EXPECT_LT((set.roots[0].matrix() - exp_axis_angle(Vector3::UnitX(), 0.3).matrix()).norm(),
            1e-15);
  EXPECT_NEAR(set.base_angle, 0.9, 1e-15);
}

TEST(NthRoots, RejectsZeroOrder) {
  EXPECT_THROW(nth_roots(Rotation::identity(), 0), Error);
  EXPECT_THROW(nth_roots(Rotation::identity(), -2), Error);
}

TEST(NthRoots, CompositionOracleAndAngles) {
  std::mt19937_64 gen(8);
  std::uniform_int_distribution<int> order(1, 40);
  int cases = 0;
  while (cases < 1000) {
    const Rotation e = random_rotation(gen);
    const int n = order(gen);
    const RootSet set = nth_roots(e, n);
    const double gamma = set.base_angle;
    ASSERT_GE(gamma, 0.0);
    ASSERT_LE(gamma, kPi);
    std::vector<double> got;
    std::vector<double> expected;
    for (int k = 0; k < n; ++k, ++cases) {
      ASSERT_LT((power(set.roots[k], n) - e.matrix()).norm(), 1e-9);
      got.push_back(angle_of(set.roots[k]));
      // |gamma/n - 2k pi/n| reduced to [0, pi]
      double a = std::remainder(gamma / n - 2.0 * k * kPi / n, 2.0 * kPi);
      expected.push_back(std::abs(a));
      // signed angle about the shared axis
      const AxisAngle log_k = log_rotation(set.roots[k]);
      const double signed_angle = log_k.axis.dot(set.axis) >= 0 ? log_k.angle : -log_k.angle;
      const double diff = std::remainder(signed_angle - (gamma / n - 2.0 * k * kPi / n), 2.0 * kPi);
      ASSERT_LT(std::abs(diff), 1e-9);
    }
    std::sort(got.begin(), got.end());
    std::sort(expected.begin(), expected.end());
    for (std::size_t i = 0; i < got.size(); ++i) ASSERT_NEAR(got[i], expected[i], 1e-9);
  }
}

TEST(ProjectToRotation, Basics) {
  EXPECT_LT((project_to_rotation(Matrix3::Identity()).matrix() - Matrix3::Identity()).norm(),
            1e-15);
  EXPECT_LT(
      (project_to_rotation(2.0 * Matrix3::Identity()).matrix() - Matrix3::Identity()).norm(),
      1e-15);
}

TEST(ProjectToRotation, DegenerateInputRaises) {
  try {
    project_to_rotation(Matrix3::Zero());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateProjection);
  }
  const Vector3 u(1, 2, 3);
  const Vector3 v(0, 1, -1);
  EXPECT_THROW(project_to_rotation(u * v.transpose()), Error);
  // rank two is fine
  Matrix3 rank2 = Matrix3::Identity();
  rank2(2, 2) = 0.0;
  EXPECT_LT((project_to_rotation(rank2).matrix() - Matrix3::Identity()).norm(), 1e-15);
}

TEST(ProjectToRotation, BeatsMonteCarloCandidates) {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 5; ++trial) {
    Matrix3 m;
    for (int i = 0; i < 9; ++i) m(i) = normal(gen);
    const Rotation best = project_to_rotation(m);
    const double d = (best.matrix() - m).norm();
    for (int c = 0; c < 10000; ++c) {
      ASSERT_LE(d, (random_rotation(gen).matrix() - m).norm() + 1e-12);
    }
  }
}

TEST(ProjectToRotation, IdempotentAndScaleInvariantOnSO3) {
  std::mt19937_64 gen(10);
  std::uniform_real_distribution<double> angle(0.0, kPi);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int i = 0; i < kPropertyCases; ++i) {
    const Rotation r = exp_axis_angle(random_unit(gen), angle(gen));
    ASSERT_LT((project_to_rotation(r.matrix()).matrix() - r.matrix()).norm(), 1e-12);
    ASSERT_LT((project_to_rotation(scale(gen) * r.matrix()).matrix() - r.matrix()).norm(), 1e-12);
  }
}

TEST(ProjectToRotation, OutputIsRotation) {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> normal;
  for (int i = 0; i < kPropertyCases; ++i) {
    Matrix3 m;
    for (int e = 0; e < 9; ++e) m(e) = normal(gen);
    const Rotation r = project_to_rotation(m);
    ASSERT_LT(orthogonality_error(r.matrix()), 1e-12);
    ASSERT_NEAR(r.matrix().determinant(), 1.0, 1e-12);
  }
}

TEST(Rotation, FromMatrixValidates) {
  EXPECT_NO_THROW(Rotation::from_matrix(Matrix3::Identity()));
  Matrix3 bad = Matrix3::Identity();
  bad(0, 1) = 1e-6;
  EXPECT_THROW(Rotation::from_matrix(bad), Error);
  EXPECT_NO_THROW(Rotation::from_matrix(bad, 1e-5));
}

}  // namespace
}  // namespace rotavg
