#pragma once

// Primal-dual rotation averaging. The primal step takes the three smallest
// eigenvectors of Lambda - R~, anchors the gauge on the first block and
// projects every block onto SO(3); the dual step rebuilds the multiplier
// from the stationarity condition and symmetrizes it. The dual starts at the
// noise-free multiplier (D + I) kron I_3.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <optional>
#include <vector>

#include "rotavg/eigensolver.hpp"
#include "rotavg/error.hpp"
#include "rotavg/graph.hpp"
#include "rotavg/so3.hpp"

namespace rotavg {

struct SolverConfig {
  int max_iterations = 100;
  /// Stop once min |lambda_i| of the primal eigenproblem drops below this.
  double epsilon = 1e-15;
  double shift = -1e-6;
  /// Scale epsilon by the largest absolute row sum of Lambda - R~.
  bool relative_epsilon = false;
  /// Tolerance of the independent certificate run on the final iterate.
  double certify_tolerance = 1e-8;
  EigenOptions eigen;

  void validate() const {
    if (!(epsilon > 0.0)) throw Error(ErrorCode::kInvalidArgument, "epsilon must be positive");
    if (max_iterations < 1) {
      throw Error(ErrorCode::kInvalidArgument, "max_iterations must be at least 1");
    }
  }
};

struct TraceRow {
  int iteration = 0;
  double min_abs_lambda = 0.0;
  double cost = 0.0;
  double wall_ms = 0.0;
};

struct Certificate {
  double min_eigenvalue = 0.0;
  double stationarity_residual = 0.0;
  bool certified = false;
};

struct SolveReport {
  BlockVector rotations;
  BlockDiagonal multiplier;
  int iterations = 0;
  std::vector<double> min_eigenvalue_history;  // min |lambda_i| per iteration
  std::vector<TraceRow> trace;
  double final_cost = 0.0;
  bool converged = false;  // the min |lambda_i| test fired
  bool certified = false;  // converged and the final certificate holds
  Certificate certificate;
  int gauge_fallbacks = 0;
  double wall_time = 0.0;  // seconds
};

struct PrimalStep {
  BlockVector rotations;
  Eigen::MatrixXd basis;    // the 3n x 3 eigenvector block before gauge fixing
  Eigen::Vector3d lambdas;  // ascending
  bool gauge_fallback = false;
};

/// f(R) = -3n - 2 sum_edges tr(R~_ij R_j R_i^T).
inline double cost(const MeasurementGraph& g, const BlockVector& r) {
  detail::require_dimension(g.node_count(), r.size(), "rotation blocks");
  double sum = 0.0;
  for (const Edge& e : g.edges()) {
    sum += (e.measurement.matrix() * r.block(e.j) * r.block(e.i).transpose()).trace();
  }
  return -3.0 * static_cast<double>(g.node_count()) - 2.0 * sum;
}

/// Lambda_i = I + Psi(sum_{j~i} R~_ij R_j R_i^T), Psi(X) = (X + X^T) / 2.
inline BlockDiagonal kkt_multiplier(const MeasurementGraph& g, const BlockVector& r) {
  detail::require_dimension(g.node_count(), r.size(), "rotation blocks");
  std::vector<Matrix3> s(static_cast<std::size_t>(g.node_count()), Matrix3::Zero());
  for (const Edge& e : g.edges()) {
    const Matrix3 rj_ri = r.block(e.j) * r.block(e.i).transpose();
    s[static_cast<std::size_t>(e.i)].noalias() += e.measurement.matrix() * rj_ri;
    s[static_cast<std::size_t>(e.j)].noalias() += e.measurement.matrix().transpose() * rj_ri.transpose();
  }
  BlockDiagonal lambda(g.node_count());
  for (Index i = 0; i < g.node_count(); ++i) {
    const Matrix3& b = s[static_cast<std::size_t>(i)];
    lambda[i] = Matrix3::Identity() + 0.5 * (b + b.transpose());
  }
  return lambda;
}

inline BlockDiagonal dual_update(const MeasurementGraph& g, const BlockVector& r) {
  return kkt_multiplier(g, r);
}

/// One primal step against the current dual.
inline PrimalStep primal_update(const PairwiseMatrix& m, const BlockDiagonal& dual,
                                double shift = -1e-6, const EigenOptions& options = {},
                                const Eigen::MatrixXd* warm_start = nullptr) {
  detail::require_dimension(m.node_count(), dual.size(), "multiplier blocks");
  const Index n = m.node_count();
  PrimalStep step;
  if (n == 1) {
    step.rotations = BlockVector(1);
    step.rotations.block(0) = Matrix3::Identity();
    step.basis = Eigen::MatrixXd::Identity(3, 3);
    step.lambdas = (dual[0] - Matrix3::Identity()).selfadjointView<Eigen::Lower>().eigenvalues();
    return step;
  }

  const EigenResult eig = smallest_eigenpairs(assemble_shifted(dual, m), 3, shift, options, warm_start);
  step.basis = eig.eigenvectors;
  step.lambdas = eig.eigenvalues;

  const Matrix3 x1 = step.basis.topRows<3>();
  Eigen::JacobiSVD<Matrix3> svd(x1);
  Matrix3 gauge;
  if (svd.singularValues()[2] < 1e-8) {
    gauge = project_to_rotation(x1).matrix().transpose();
    step.gauge_fallback = true;
  } else {
    gauge = x1.inverse();
  }
  const StackedBlocks x = step.basis * gauge;

  step.rotations = BlockVector(n);
  for (Index i = 0; i < n; ++i) {
    step.rotations.block(i) = project_to_rotation(x.middleRows<3>(3 * i)).matrix();
  }
  // Anchor the first block exactly.
  const Matrix3 anchor = step.rotations.block(0).transpose();
  for (Index i = 1; i < n; ++i) step.rotations.block(i) = step.rotations.block(i) * anchor;
  step.rotations.block(0) = Matrix3::Identity();
  return step;
}

/// Global optimality certificate for (R, Lambda).
inline Certificate certify(const PairwiseMatrix& m, const BlockVector& r,
                           const BlockDiagonal& lambda, double tol,
                           const EigenOptions& options = {}) {
  detail::require_dimension(m.node_count(), r.size(), "rotation blocks");
  detail::require_dimension(m.node_count(), lambda.size(), "multiplier blocks");
  Certificate c;
  const SparseMatrix shifted = assemble_shifted(lambda, m);
  c.min_eigenvalue = r.size() == 1
                         ? Eigen::MatrixXd(shifted).selfadjointView<Eigen::Lower>().eigenvalues()[0]
                         : min_eigenvalue(shifted, -1e-6, options);
  const double norm = r.stacked().norm();
  c.stationarity_residual = norm > 0.0 ? matvec(lambda, m, r.stacked()).norm() / norm : 0.0;
  c.certified = c.min_eigenvalue >= -tol &&
                c.stationarity_residual <= tol * std::sqrt(static_cast<double>(r.size()));
  return c;
}

inline SolveReport solve(const MeasurementGraph& g, const SolverConfig& cfg = {}) {
  cfg.validate();
  if (g.node_count() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "solve needs at least two nodes");
  }
  if (!is_connected(g)) {
    throw Error(ErrorCode::kInvalidArgument, "measurement graph is not connected");
  }
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  };

  const PairwiseMatrix m = build_pairwise_matrix(g);
  SolveReport report;
  BlockDiagonal dual = lambda_noise_free(g);
  std::optional<Eigen::MatrixXd> warm;

  for (int t = 0; t < cfg.max_iterations; ++t) {
    PrimalStep step;
    try {
      step = primal_update(m, dual, cfg.shift, cfg.eigen, warm ? &*warm : nullptr);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateProjection) throw;
      break;
    }
    warm = step.basis;
    if (step.gauge_fallback) ++report.gauge_fallbacks;

    double threshold = cfg.epsilon;
    if (cfg.relative_epsilon) threshold *= detail::inf_norm(assemble_shifted(dual, m));

    report.rotations = std::move(step.rotations);
    dual = dual_update(g, report.rotations);
    report.iterations = t + 1;

    const double min_abs = step.lambdas.cwiseAbs().minCoeff();
    report.min_eigenvalue_history.push_back(min_abs);
    report.trace.push_back({t + 1, min_abs, cost(g, report.rotations), elapsed_ms()});
    // On unicyclic graphs Lambda_nf - R~ has an exact zero eigenvalue along
    // the cycle-error axis for any noise, so the eigenvalue alone can stop a
    // non-stationary iterate. Gate it on stationarity as well.
    const StackedBlocks& x = report.rotations.stacked();
    const double residual = matvec(dual, m, x).norm() / x.norm();
    const double stationary_tol = cfg.certify_tolerance * std::sqrt(static_cast<double>(g.node_count()));
    if (min_abs < threshold && residual <= stationary_tol) {
      report.converged = true;
      break;
    }
  }

  if (report.iterations == 0) {
    report.rotations = BlockVector(g.node_count());
    for (Index i = 0; i < g.node_count(); ++i) report.rotations.block(i) = Matrix3::Identity();
    dual = dual_update(g, report.rotations);
  }
  report.multiplier = std::move(dual);
  report.final_cost = cost(g, report.rotations);
  report.certificate = certify(m, report.rotations, report.multiplier, cfg.certify_tolerance, cfg.eigen);
  report.certified = report.converged && report.certificate.certified;
  report.wall_time = elapsed_ms() / 1000.0;
  return report;
}

/// Cosine of the principal angle between two 3-dimensional subspaces,
/// sqrt(tr(U^T Unf Unf^T U) / 3).
inline double principal_angle_cosine(const Eigen::MatrixXd& u, const Eigen::MatrixXd& u_nf) {
  if (u.rows() != u_nf.rows() || u.cols() != 3 || u_nf.cols() != 3) {
    throw Error(ErrorCode::kDimensionMismatch, "principal angle needs two 3n x 3 bases");
  }
  const auto orthonormal = [](const Eigen::MatrixXd& b) {
    return ((b.transpose() * b) - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= 1e-8;
  };
  if (!orthonormal(u) || !orthonormal(u_nf)) {
    throw Error(ErrorCode::kInvalidArgument, "basis columns are not orthonormal");
  }
  const Eigen::Matrix3d c = u.transpose() * u_nf;
  const double cos2 = c.squaredNorm() / 3.0;
  return std::sqrt(std::clamp(cos2, 0.0, 1.0));
}

}  // namespace rotavg
