#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <vector>

#include "rotavg/eigensolver.hpp"
#include "rotavg/graph.hpp"

namespace rotavg {

/// Graph Laplacian D - A of the measurement topology.
inline SparseMatrix laplacian(const MeasurementGraph& g) {
  const Index n = g.node_count();
  std::vector<Eigen::Triplet<double, int>> triplets;
  triplets.reserve(static_cast<std::size_t>(n + 4 * g.edge_count()));
  const auto degree = degree_matrix(g);
  for (Index i = 0; i < n; ++i) {
    triplets.emplace_back(static_cast<int>(i), static_cast<int>(i),
                          static_cast<double>(degree[static_cast<std::size_t>(i)]));
  }
  for (const Edge& e : g.edges()) {
    triplets.emplace_back(static_cast<int>(e.i), static_cast<int>(e.j), -1.0);
    triplets.emplace_back(static_cast<int>(e.j), static_cast<int>(e.i), -1.0);
  }
  SparseMatrix l(n, n);
  l.setFromTriplets(triplets.begin(), triplets.end());
  return l;
}

/// Algebraic connectivity: the second-smallest Laplacian eigenvalue.
/// Zero (to rounding) for a disconnected graph.
inline double fiedler_value(const MeasurementGraph& g, Index dense_limit = 2000) {
  if (g.node_count() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "Fiedler value needs at least two nodes");
  }
  const SparseMatrix l = laplacian(g);
  if (g.node_count() <= dense_limit) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(l),
                                                            Eigen::EigenvaluesOnly);
    return std::max(es.eigenvalues()[1], 0.0);
  }
  return std::max(smallest_eigenpairs(l, 2, -1e-6).eigenvalues[1], 0.0);
}

}  // namespace rotavg
