#pragma once

// Extremal eigenpairs of sparse symmetric matrices by shift-invert block
// Lanczos with thick restarts and full reorthogonalization.
//
// The shifted matrix M - sigma I is factorized with a sparse LDL^T. Its
// inertia (count of negative pivots) tells whether sigma lies below the
// whole spectrum; if it does not, sigma is stepped down until it does, so
// the dominant eigenvalues of (M - sigma I)^{-1} are exactly the smallest
// eigenvalues of M. Eigenvalues are reported as Rayleigh quotients x^T M x
// of the converged vectors.

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "rotavg/error.hpp"
#include "rotavg/graph.hpp"
#include "rotavg/rng.hpp"

namespace rotavg {

struct EigenOptions {
  /// Ritz pairs are accepted once their residual in the shift-inverted space
  /// is below tolerance * theta (or the rounding level of the operator).
  double tolerance = 1e-14;
  int max_restarts = 300;
  /// Krylov basis size; 0 selects max(2k + 10, 20).
  Index subspace_dim = 0;
  /// When the sparse route fails, matrices up to this dimension are solved
  /// by a dense eigendecomposition instead of raising.
  Index dense_threshold = 600;
  std::uint64_t seed = 0x5eed;
};

struct EigenResult {
  Eigen::VectorXd eigenvalues;    // ascending
  Eigen::MatrixXd eigenvectors;   // orthonormal columns
  Eigen::VectorXd residual_norms; // |M v - lambda v|
  double shift = 0.0;             // shift actually factorized
  int restarts = 0;
  bool dense = false;
};

namespace detail {

inline double inf_norm(const SparseMatrix& m) {
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(m.rows());
  for (int c = 0; c < m.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(m, c); it; ++it) rows[it.row()] += std::abs(it.value());
  }
  return rows.size() ? rows.maxCoeff() : 0.0;
}

inline double gershgorin_lower(const SparseMatrix& m) {
  Eigen::VectorXd radius = Eigen::VectorXd::Zero(m.rows());
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(m.rows());
  for (int c = 0; c < m.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(m, c); it; ++it) {
      if (it.row() == it.col()) {
        diag[it.row()] = it.value();
      } else {
        radius[it.row()] += std::abs(it.value());
      }
    }
  }
  return (diag - radius).minCoeff();
}

inline void fill_random(Eigen::Ref<Eigen::MatrixXd> block, CounterRng& rng) {
  for (Index c = 0; c < block.cols(); ++c) {
    for (Index r = 0; r < block.rows(); ++r) block(r, c) = rng.normal();
  }
}

// Orthonormalizes w against basis (two Gram-Schmidt passes) and internally.
// Returns the b x b coefficient matrix R with w_in = basis * H + out * R.
// Columns that vanish are replaced by random directions with zero R row.
inline Eigen::MatrixXd orthonormalize_block(const Eigen::Ref<const Eigen::MatrixXd>& basis,
                                            Eigen::MatrixXd& w, CounterRng& rng) {
  const Index b = w.cols();
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(b, b);
  for (Index j = 0; j < b; ++j) {
    const double original = w.col(j).norm();
    for (int pass = 0; pass < 2; ++pass) {
      if (basis.cols() > 0) w.col(j) -= basis * (basis.transpose() * w.col(j));
      for (Index i = 0; i < j; ++i) {
        const double h = w.col(i).dot(w.col(j));
        if (pass == 0) r(i, j) = h; else r(i, j) += h;
        w.col(j) -= h * w.col(i);
      }
    }
    double norm = w.col(j).norm();
    if (norm > 1e-10 * std::max(original, std::numeric_limits<double>::min()) && norm > 0.0) {
      r(j, j) = norm;
      w.col(j) /= norm;
      continue;
    }
    // Krylov space exhausted along this column: continue with a fresh
    // random direction that does not couple to the current basis.
    for (int attempt = 0; attempt < 8; ++attempt) {
      Eigen::VectorXd v(w.rows());
      for (Index q = 0; q < v.size(); ++q) v[q] = rng.normal();
      for (int pass = 0; pass < 2; ++pass) {
        if (basis.cols() > 0) v -= basis * (basis.transpose() * v);
        for (Index i = 0; i < j; ++i) v -= w.col(i).dot(v) * w.col(i);
      }
      norm = v.norm();
      if (norm > 1e-8) {
        w.col(j) = v / norm;
        for (Index i = 0; i <= j; ++i) r(i, j) = 0.0;
        break;
      }
    }
    if (!(norm > 1e-8)) {
      throw Error(ErrorCode::kInvalidArgument, "Krylov basis cannot be extended");
    }
  }
  return r;
}

inline EigenResult dense_smallest(const SparseMatrix& m, int k) {
  const Eigen::MatrixXd d = Eigen::MatrixXd(m);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (d + d.transpose()));
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::kFactorization, "dense eigendecomposition failed");
  }
  EigenResult out;
  out.eigenvectors = es.eigenvectors().leftCols(k);
  out.eigenvalues.resize(k);
  out.residual_norms.resize(k);
  for (int i = 0; i < k; ++i) {
    const Eigen::VectorXd x = out.eigenvectors.col(i);
    const Eigen::VectorXd mx = m * x;
    out.eigenvalues[i] = x.dot(mx);
    out.residual_norms[i] = (mx - out.eigenvalues[i] * x).norm();
  }
  out.dense = true;
  return out;
}

}  // namespace detail

/// LDL^T factorization of M - sigma I that reports its inertia.
class ShiftedFactorization {
 public:
  /// Returns false when a zero pivot makes the factorization unusable.
  bool factorize(const SparseMatrix& m, double sigma) {
    SparseMatrix eye(m.rows(), m.cols());
    eye.setIdentity();
    SparseMatrix shifted = m - sigma * eye;
    shifted.makeCompressed();
    ldlt_.compute(shifted);
    if (ldlt_.info() != Eigen::Success) return false;
    const auto& d = ldlt_.vectorD();
    negative_ = 0;
    for (Index i = 0; i < d.size(); ++i) {
      if (!std::isfinite(d[i]) || d[i] == 0.0) return false;
      if (d[i] < 0.0) ++negative_;
    }
    return true;
  }

  /// Number of eigenvalues of M below sigma.
  Index negative_pivots() const { return negative_; }

  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const { return ldlt_.solve(rhs); }

 private:
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  Index negative_ = 0;
};

/// The k algebraically smallest eigenpairs of the symmetric matrix m.
///
/// `warm_start`, when given, seeds the starting block (its columns need not
/// be orthonormal).
inline EigenResult smallest_eigenpairs(const SparseMatrix& m, int k, double shift,
                                       const EigenOptions& options = {},
                                       const Eigen::MatrixXd* warm_start = nullptr) {
  const Index n = m.rows();
  if (m.cols() != n) throw Error(ErrorCode::kDimensionMismatch, "matrix is not square");
  if (k < 1 || k > 6) throw Error(ErrorCode::kInvalidArgument, "k must be in [1, 6]");
  if (n < k) throw Error(ErrorCode::kInvalidArgument, "k exceeds the matrix dimension");

  const Index block = k;
  const Index basis_cap = options.subspace_dim > 0
                              ? std::max<Index>(options.subspace_dim, 2 * block)
                              : std::max<Index>(2 * k + 10, 20);
  if (n <= basis_cap + 2 * block) return detail::dense_smallest(m, k);

  const double scale = std::max(detail::inf_norm(m), 1.0);

  // Place the shift below the spectrum.
  ShiftedFactorization factor;
  double sigma = shift;
  bool perturbed = false;
  double step = 0.0;
  const double floor_sigma = detail::gershgorin_lower(m) - 1e-3 * scale;
  for (int attempt = 0;; ++attempt) {
    if (!factor.factorize(m, sigma)) {
      if (!perturbed) {
        perturbed = true;
        sigma -= 1e-8;
        continue;
      }
      if (n <= options.dense_threshold) return detail::dense_smallest(m, k);
      throw Error(ErrorCode::kFactorization,
                  "shifted matrix is singular at sigma = " + std::to_string(sigma));
    }
    if (factor.negative_pivots() == 0) break;
    if (attempt > 64) {
      if (n <= options.dense_threshold) return detail::dense_smallest(m, k);
      throw Error(ErrorCode::kFactorization, "could not place the shift below the spectrum");
    }
    step = step == 0.0 ? std::max(1e-3 * scale, std::abs(sigma)) : 4.0 * step;
    sigma = std::max(shift - step, floor_sigma);
    if (sigma == floor_sigma) step = std::numeric_limits<double>::infinity();
  }

  CounterRng rng(options.seed);
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, basis_cap + block);
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(basis_cap, basis_cap);

  {
    Eigen::MatrixXd start(n, block);
    Index warm = 0;
    if (warm_start != nullptr && warm_start->rows() == n) {
      warm = std::min<Index>(block, warm_start->cols());
      start.leftCols(warm) = warm_start->leftCols(warm);
    }
    detail::fill_random(start.rightCols(block - warm), rng);
    detail::orthonormalize_block(q.leftCols(0), start, rng);
    q.leftCols(block) = start;
  }

  Index known = 0;  // columns of q with a complete projection in t
  Eigen::MatrixXd coupling = Eigen::MatrixXd::Zero(block, block);
  std::vector<double> best(static_cast<std::size_t>(k), std::numeric_limits<double>::infinity());
  const double floor_residual = std::max(options.tolerance, 100.0 * std::numeric_limits<double>::epsilon()) * scale;

  for (int restart = 0; restart <= options.max_restarts; ++restart) {
    while (known + block <= basis_cap) {
      const Index total = known + block;
      Eigen::MatrixXd w = factor.solve(q.middleCols(known, block));
      Eigen::MatrixXd h = q.leftCols(total).transpose() * w;
      w.noalias() -= q.leftCols(total) * h;
      const Eigen::MatrixXd h2 = q.leftCols(total).transpose() * w;
      w.noalias() -= q.leftCols(total) * h2;
      h += h2;
      t.block(0, known, total, block) = h;
      t.block(known, 0, block, total) = h.transpose();
      t.block(known, known, block, block) =
          0.5 * (h.bottomRows(block) + h.bottomRows(block).transpose());
      coupling = detail::orthonormalize_block(q.leftCols(total), w, rng);
      q.middleCols(total, block) = w;
      known = total;
    }

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz(t.topLeftCorner(known, known));
    // dominant theta first
    const Eigen::VectorXd theta = ritz.eigenvalues().reverse();
    const Eigen::MatrixXd y = ritz.eigenvectors().rowwise().reverse();

    const Eigen::MatrixXd x = q.leftCols(known) * y.leftCols(k);
    const Eigen::MatrixXd mx = m * x;
    const double roundoff = 10.0 * std::numeric_limits<double>::epsilon() * std::abs(theta[0]);
    bool all_converged = true;
    for (int i = 0; i < k; ++i) {
      const double estimate = (coupling * y.col(i).tail(block)).norm();
      const double lambda = x.col(i).dot(mx.col(i));
      const double residual = (mx.col(i) - lambda * x.col(i)).norm();
      best[static_cast<std::size_t>(i)] = std::min(best[static_cast<std::size_t>(i)], residual);
      // rounding in the solves bounds the attainable residual by eps * |theta_max|
      const bool ok = estimate <= std::max(options.tolerance * std::abs(theta[i]), roundoff) ||
                      residual <= floor_residual;
      all_converged = all_converged && ok;
    }

    if (all_converged) {
      EigenResult out;
      out.shift = sigma;
      out.restarts = restart;
      std::vector<Index> order(static_cast<std::size_t>(k));
      Eigen::VectorXd lambdas(k);
      for (int i = 0; i < k; ++i) {
        order[static_cast<std::size_t>(i)] = i;
        lambdas[i] = x.col(i).dot(mx.col(i));
      }
      std::stable_sort(order.begin(), order.end(),
                       [&](Index a, Index b) { return lambdas[a] < lambdas[b]; });
      out.eigenvalues.resize(k);
      out.eigenvectors.resize(n, k);
      out.residual_norms.resize(k);
      for (int i = 0; i < k; ++i) {
        const Index src = order[static_cast<std::size_t>(i)];
        out.eigenvalues[i] = lambdas[src];
        out.eigenvectors.col(i) = x.col(src);
        out.residual_norms[i] = (mx.col(src) - lambdas[src] * x.col(src)).norm();
      }
      return out;
    }

    // Thick restart: keep the leading Ritz vectors, keep the residual block.
    const Index keep = std::min<Index>(basis_cap - block, std::max<Index>(k + 1, (known + k) / 2));
    const Eigen::MatrixXd ritz_vectors = q.leftCols(known) * y.leftCols(keep);
    const Eigen::MatrixXd residual_block = q.middleCols(known, block);
    q.leftCols(keep) = ritz_vectors;
    q.middleCols(keep, block) = residual_block;
    t.setZero();
    t.topLeftCorner(keep, keep) = theta.head(keep).asDiagonal();
    known = keep;
  }

  if (n <= options.dense_threshold) return detail::dense_smallest(m, k);
  throw IterationLimitError("eigensolver did not converge after " +
                                std::to_string(options.max_restarts) + " restarts",
                            best);
}

/// Smallest eigenvalue of m.
inline double min_eigenvalue(const SparseMatrix& m, double shift = -1e-6,
                             const EigenOptions& options = {}) {
  return smallest_eigenpairs(m, 1, shift, options).eigenvalues[0];
}

}  // namespace rotavg
