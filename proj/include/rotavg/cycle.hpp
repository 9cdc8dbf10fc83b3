#pragma once

// Closed-form solutions for rotation averaging on a cycle graph.
//
// With measurements R~_12, R~_23, ..., R~_n1 and cycle error
// E = R~_12 R~_23 ... R~_n1 (angle gamma), the points
//
//   R_1 = I,  R_i = (R~_12 ... R~_{i-1,i})^T E_k^{i-1}
//
// are stationary for every n-th root E_k of E (angle gamma/n - 2k pi/n);
// k = 0 is the global minimum. Every edge residual R~_ij R_j R_i^T is then a
// conjugate of E_k, so the cycle error is spread evenly over the edges.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rotavg/error.hpp"
#include "rotavg/graph.hpp"
#include "rotavg/so3.hpp"

namespace rotavg {

/// Measurements around a cycle, in traversal order; the last one closes the
/// loop from node n back to node 1.
class CycleProblem {
 public:
  explicit CycleProblem(std::vector<Rotation> measurements)
      : measurements_(std::move(measurements)) {
    if (measurements_.size() < 3) {
      throw Error(ErrorCode::kInvalidArgument, "a cycle needs at least three nodes");
    }
  }

  Index size() const { return static_cast<Index>(measurements_.size()); }
  const std::vector<Rotation>& measurements() const { return measurements_; }
  /// R~_{i,i+1} for i < n - 1, and R~_{n,1} for i = n - 1 (zero-based).
  const Rotation& measurement(Index i) const {
    return measurements_[static_cast<std::size_t>(i)];
  }

 private:
  std::vector<Rotation> measurements_;
};

struct CycleSolution {
  BlockVector rotations;
  int root_index = 0;
  double cost = 0.0;
  double gamma = 0.0;  // angle of the cycle error, in [0, pi]
  bool is_global = true;
};

inline Rotation cycle_error(const CycleProblem& p) {
  Matrix3 e = Matrix3::Identity();
  for (const Rotation& r : p.measurements()) e = e * r.matrix();
  return Rotation::unchecked(e);
}

/// Cost of the k-th stationary point, -3n - 2n tr(E_k).
inline double stationary_cost(Index n, double gamma, int k) {
  const double nd = static_cast<double>(n);
  const double angle = gamma / nd - 2.0 * k * kPi / nd;
  return -3.0 * nd - 2.0 * nd * (1.0 + 2.0 * std::cos(angle));
}

inline CycleSolution stationary_point(const CycleProblem& p, int k) {
  const Index n = p.size();
  if (k < 0 || k >= n) {
    throw Error(ErrorCode::kInvalidArgument,
                "root index " + std::to_string(k) + " outside [0, " + std::to_string(n) + ")");
  }
  const RootSet roots = nth_roots(cycle_error(p), static_cast<int>(n));
  const double angle = roots.base_angle / static_cast<double>(n) -
                       2.0 * k * kPi / static_cast<double>(n);

  CycleSolution s;
  s.root_index = k;
  s.gamma = roots.base_angle;
  s.is_global = k == 0;
  s.cost = stationary_cost(n, s.gamma, k);
  s.rotations = BlockVector(n);
  s.rotations.block(0) = Matrix3::Identity();
  Matrix3 prefix = Matrix3::Identity();
  for (Index i = 1; i < n; ++i) {
    prefix = prefix * p.measurement(i - 1).matrix();
    // powers through the exponential map rather than repeated products
    const Rotation power = exp_axis_angle(roots.axis, static_cast<double>(i) * angle);
    s.rotations.block(i) = prefix.transpose() * power.matrix();
  }
  return s;
}

inline CycleSolution solve_cycle(const CycleProblem& p) { return stationary_point(p, 0); }

/// angle_of(R~_ij R_j R_i^T) for every edge, in cycle order.
inline std::vector<double> residual_angles(const CycleProblem& p, const CycleSolution& s) {
  const Index n = p.size();
  detail::require_dimension(n, s.rotations.size(), "solution blocks");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const Index j = (i + 1) % n;
    const Matrix3 r = p.measurement(i).matrix() * s.rotations.block(j) *
                      s.rotations.block(i).transpose();
    out.push_back(angle_of(Rotation::unchecked(r)));
  }
  return out;
}

/// U_1 = I, U_i = R~_{i-1,i}^T U_{i-1}.
inline BlockDiagonal change_of_basis(const CycleProblem& p) {
  const Index n = p.size();
  BlockDiagonal u(n);
  u[0] = Matrix3::Identity();
  for (Index i = 1; i < n; ++i) u[i] = p.measurement(i - 1).matrix().transpose() * u[i - 1];
  return u;
}

/// The measurement graph 0 - 1 - ... - (n-1) - 0 of a cycle problem.
inline MeasurementGraph to_graph(const CycleProblem& p) {
  const Index n = p.size();
  MeasurementGraph g(n);
  for (Index i = 0; i < n; ++i) g.add_edge(i, (i + 1) % n, p.measurement(i));
  return g;
}

struct BasisCheck {
  bool holds = true;
  // first offending block, when holds is false
  Index row = -1;
  Index col = -1;
  double deviation = 0.0;

  explicit operator bool() const { return holds; }
};

/// Verifies that U^T R~ U has identity diagonal and adjacent blocks, the
/// cycle error at block (n, 1), its transpose at (1, n), and zeros elsewhere.
inline BasisCheck transformed_matrix_check(const CycleProblem& p, const BlockDiagonal& u,
                                           double tol = 1e-10) {
  const Index n = p.size();
  detail::require_dimension(n, u.size(), "basis blocks");
  Eigen::MatrixXd ub = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  for (Index i = 0; i < n; ++i) ub.block<3, 3>(3 * i, 3 * i) = u[i];
  const Eigen::MatrixXd transformed =
      ub.transpose() * build_pairwise_matrix(to_graph(p)).dense() * ub;

  const Matrix3 e = cycle_error(p).matrix();
  BasisCheck check;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      Matrix3 expected = Matrix3::Zero();
      if (i == n - 1 && j == 0) {
        expected = e;
      } else if (i == 0 && j == n - 1) {
        expected = e.transpose();
      } else if (std::abs(i - j) <= 1) {
        expected = Matrix3::Identity();
      }
      const double deviation =
          (transformed.block<3, 3>(3 * i, 3 * j) - expected).cwiseAbs().maxCoeff();
      if (!(deviation <= tol)) return {false, i, j, deviation};
      check.deviation = std::max(check.deviation, deviation);
    }
  }
  return check;
}

/// Eigenvalues of R~ in ascending order: 1 + 2cos(gamma/n - 2k pi/n) twice
/// and 1 + 2cos(2k pi/n) once, for k = 0..n-1.
inline std::vector<double> closed_form_spectrum(const CycleProblem& p) {
  const Index n = p.size();
  const double nd = static_cast<double>(n);
  const double gamma = angle_of(cycle_error(p));
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(3 * n));
  for (Index k = 0; k < n; ++k) {
    const double rotated = 1.0 + 2.0 * std::cos(gamma / nd - 2.0 * k * kPi / nd);
    values.push_back(rotated);
    values.push_back(rotated);
    values.push_back(1.0 + 2.0 * std::cos(2.0 * k * kPi / nd));
  }
  std::sort(values.begin(), values.end());
  return values;
}

/// A cycle problem recovered from a graph, with order[i] the graph node at
/// cycle position i.
struct GraphCycle {
  CycleProblem problem;
  std::vector<Index> order;
};

/// Walks a simple cycle starting at node 0 towards its smaller neighbour.
inline GraphCycle cycle_from_graph(const MeasurementGraph& g) {
  const Index n = g.node_count();
  if (n < 3 || g.edge_count() != n) {
    throw Error(ErrorCode::kInvalidArgument, "graph is not a simple cycle");
  }
  std::vector<std::vector<std::pair<Index, const Edge*>>> adjacency(static_cast<std::size_t>(n));
  for (const Edge& e : g.edges()) {
    adjacency[static_cast<std::size_t>(e.i)].push_back({e.j, &e});
    adjacency[static_cast<std::size_t>(e.j)].push_back({e.i, &e});
  }
  for (const auto& a : adjacency) {
    if (a.size() != 2 || a[0].first == a[1].first) {
      throw Error(ErrorCode::kInvalidArgument, "graph is not a simple cycle");
    }
  }

  std::vector<Index> order{0};
  std::vector<Rotation> measurements;
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  seen[0] = 1;
  const auto& start = adjacency[0];
  Index previous = -1;
  Index current = 0;
  Index next = std::min(start[0].first, start[1].first);
  while (true) {
    const auto& links = adjacency[static_cast<std::size_t>(current)];
    const auto& link = links[0].first == next ? links[0] : links[1];
    const Edge& e = *link.second;
    measurements.push_back(e.i == current ? e.measurement : e.measurement.transpose());
    if (next == 0) break;
    if (seen[static_cast<std::size_t>(next)]) {
      throw Error(ErrorCode::kInvalidArgument, "graph is not a simple cycle");
    }
    seen[static_cast<std::size_t>(next)] = 1;
    order.push_back(next);
    const auto& out = adjacency[static_cast<std::size_t>(next)];
    previous = current;
    current = next;
    next = out[0].first == previous ? out[1].first : out[0].first;
  }
  if (static_cast<Index>(order.size()) != n) {
    throw Error(ErrorCode::kInvalidArgument, "graph is not connected");
  }
  return {CycleProblem(std::move(measurements)), std::move(order)};
}

/// Rotations indexed by graph node instead of cycle position.
inline BlockVector in_graph_order(const BlockVector& r, const std::vector<Index>& order) {
  detail::require_dimension(static_cast<Index>(order.size()), r.size(), "cycle order");
  BlockVector out(r.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.block(order[i]) = r.block(static_cast<Index>(i));
  }
  return out;
}

}  // namespace rotavg
