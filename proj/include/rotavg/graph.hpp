#pragma once

// Measurement graphs and the block-structured matrices built from them:
// the pairwise measurement matrix, the degree vector, block-diagonal
// multipliers and block vectors of stacked 3x3 blocks.

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cstddef>
#include <deque>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rotavg/error.hpp"
#include "rotavg/so3.hpp"

namespace rotavg {

using Index = std::ptrdiff_t;
using StackedBlocks = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

/// n stacked 3x3 blocks forming a 3n x 3 array.
class BlockVector {
 public:
  BlockVector() = default;
  explicit BlockVector(Index n) : data_(StackedBlocks::Zero(3 * n, 3)) {}
  explicit BlockVector(StackedBlocks data) : data_(std::move(data)) {
    if (data_.rows() % 3 != 0) {
      throw Error(ErrorCode::kDimensionMismatch, "stacked rows not a multiple of 3");
    }
  }

  static BlockVector from_rotations(std::span<const Rotation> rotations) {
    BlockVector v(static_cast<Index>(rotations.size()));
    for (std::size_t i = 0; i < rotations.size(); ++i) {
      v.block(static_cast<Index>(i)) = rotations[i].matrix();
    }
    return v;
  }

  Index size() const { return data_.rows() / 3; }

  using BlockRef = StackedBlocks::NRowsBlockXpr<3>::Type;
  using ConstBlockRef = StackedBlocks::ConstNRowsBlockXpr<3>::Type;

  BlockRef block(Index i) { return data_.middleRows<3>(3 * i); }
  ConstBlockRef block(Index i) const { return data_.middleRows<3>(3 * i); }

  Rotation rotation(Index i) const { return Rotation::unchecked(block(i)); }

  std::vector<Rotation> rotations() const {
    std::vector<Rotation> out;
    out.reserve(static_cast<std::size_t>(size()));
    for (Index i = 0; i < size(); ++i) out.push_back(rotation(i));
    return out;
  }

  const StackedBlocks& stacked() const { return data_; }
  StackedBlocks& stacked() { return data_; }

 private:
  StackedBlocks data_;
};

/// n symmetric 3x3 blocks on the diagonal of a 3n x 3n matrix.
class BlockDiagonal {
 public:
  BlockDiagonal() = default;
  explicit BlockDiagonal(Index n)
      : blocks_(static_cast<std::size_t>(n), Matrix3::Zero()) {}
  explicit BlockDiagonal(std::vector<Matrix3> blocks) : blocks_(std::move(blocks)) {}

  Index size() const { return static_cast<Index>(blocks_.size()); }

  Matrix3& operator[](Index i) { return blocks_[static_cast<std::size_t>(i)]; }
  const Matrix3& operator[](Index i) const {
    return blocks_[static_cast<std::size_t>(i)];
  }

  const std::vector<Matrix3>& blocks() const { return blocks_; }

  /// Largest |B - B^T| entry over all blocks.
  double asymmetry() const {
    double worst = 0.0;
    for (const auto& b : blocks_) {
      worst = std::max(worst, (b - b.transpose()).cwiseAbs().maxCoeff());
    }
    return worst;
  }

 private:
  std::vector<Matrix3> blocks_;
};

struct Edge {
  Index i = 0;
  Index j = 0;
  Rotation measurement;  // relative rotation R_i R_j^T
};

/// Undirected measurement graph with one relative rotation per edge.
///
/// Edges are stored with i < j; an edge supplied as (j, i) has its
/// measurement transposed. Duplicates are not rejected here, only when the
/// pairwise matrix is assembled.
class MeasurementGraph {
 public:
  /// Measurements whose orthogonality error is at most this are re-projected
  /// onto SO(3); anything worse is rejected.
  static constexpr double kReprojectionTolerance = 1e-6;

  MeasurementGraph() = default;
  explicit MeasurementGraph(Index node_count) : node_count_(node_count) {
    if (node_count < 0) {
      throw Error(ErrorCode::kInvalidArgument, "negative node count");
    }
  }

  Index node_count() const { return node_count_; }
  Index edge_count() const { return static_cast<Index>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }

  void add_edge(Index i, Index j, const Rotation& measurement) {
    if (i < 0 || j < 0 || i >= node_count_ || j >= node_count_) {
      throw Error(ErrorCode::kInvalidArgument,
                  "edge (" + std::to_string(i) + ", " + std::to_string(j) +
                      ") references a node outside [0, " +
                      std::to_string(node_count_) + ")");
    }
    if (i == j) {
      throw Error(ErrorCode::kInvalidArgument,
                  "self-loop on node " + std::to_string(i));
    }
    if (i < j) {
      edges_.push_back({i, j, measurement});
    } else {
      edges_.push_back({j, i, measurement.transpose()});
    }
  }

  /// Validates a raw 3x3 measurement, re-projecting small rounding errors.
  void add_edge(Index i, Index j, const Matrix3& measurement) {
    if (!measurement.allFinite() ||
        orthogonality_error(measurement) > kReprojectionTolerance ||
        std::abs(measurement.determinant() - 1.0) > kReprojectionTolerance) {
      throw Error(ErrorCode::kInvalidArgument,
                  "measurement on edge (" + std::to_string(i) + ", " +
                      std::to_string(j) + ") is not a rotation");
    }
    add_edge(i, j, project_to_rotation(measurement));
  }

 private:
  Index node_count_ = 0;
  std::vector<Edge> edges_;
};

/// Symmetric 3n x 3n matrix with identity diagonal blocks and one rotation
/// per edge, stored as block-sparse rows over the strict upper triangle.
class PairwiseMatrix {
 public:
  PairwiseMatrix() = default;

  Index node_count() const { return n_; }
  Index dimension() const { return 3 * n_; }
  Index stored_blocks() const { return static_cast<Index>(cols_.size()); }

  /// Block (i, j), or a null block when there is no edge.
  Matrix3 block(Index i, Index j) const {
    if (i == j) return Matrix3::Identity();
    const bool upper = i < j;
    const Index r = upper ? i : j;
    const Index c = upper ? j : i;
    const auto first = cols_.begin() + row_ptr_[static_cast<std::size_t>(r)];
    const auto last = cols_.begin() + row_ptr_[static_cast<std::size_t>(r) + 1];
    const auto it = std::lower_bound(first, last, c);
    if (it == last || *it != c) return Matrix3::Zero();
    const Matrix3& b = blocks_[static_cast<std::size_t>(it - cols_.begin())];
    return upper ? b : Matrix3(b.transpose());
  }

  bool has_block(Index i, Index j) const {
    if (i == j) return true;
    const Index r = std::min(i, j);
    const Index c = std::max(i, j);
    const auto first = cols_.begin() + row_ptr_[static_cast<std::size_t>(r)];
    const auto last = cols_.begin() + row_ptr_[static_cast<std::size_t>(r) + 1];
    return std::binary_search(first, last, c);
  }

  /// Calls f(i, j, block) for every stored upper block, i < j.
  template <typename F>
  void for_each_upper(F&& f) const {
    for (Index r = 0; r < n_; ++r) {
      for (Index p = row_ptr_[static_cast<std::size_t>(r)];
           p < row_ptr_[static_cast<std::size_t>(r) + 1]; ++p) {
        f(r, cols_[static_cast<std::size_t>(p)], blocks_[static_cast<std::size_t>(p)]);
      }
    }
  }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd d = Eigen::MatrixXd::Identity(dimension(), dimension());
    for_each_upper([&](Index i, Index j, const Matrix3& b) {
      d.block<3, 3>(3 * i, 3 * j) = b;
      d.block<3, 3>(3 * j, 3 * i) = b.transpose();
    });
    return d;
  }

 private:
  friend PairwiseMatrix build_pairwise_matrix(const MeasurementGraph& g);

  Index n_ = 0;
  std::vector<Index> row_ptr_{0};
  std::vector<Index> cols_;
  std::vector<Matrix3> blocks_;
};

inline PairwiseMatrix build_pairwise_matrix(const MeasurementGraph& g) {
  const Index n = g.node_count();
  std::vector<const Edge*> sorted;
  sorted.reserve(g.edges().size());
  for (const Edge& e : g.edges()) sorted.push_back(&e);
  std::stable_sort(sorted.begin(), sorted.end(), [](const Edge* a, const Edge* b) {
    return a->i != b->i ? a->i < b->i : a->j < b->j;
  });

  PairwiseMatrix m;
  m.n_ = n;
  m.row_ptr_.assign(static_cast<std::size_t>(n) + 1, 0);
  m.cols_.reserve(sorted.size());
  m.blocks_.reserve(sorted.size());
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    const Edge& e = *sorted[k];
    if (k > 0 && sorted[k - 1]->i == e.i && sorted[k - 1]->j == e.j) {
      throw Error(ErrorCode::kDuplicateEdge, "edge (" + std::to_string(e.i) + ", " +
                                                 std::to_string(e.j) +
                                                 ") appears more than once");
    }
    ++m.row_ptr_[static_cast<std::size_t>(e.i) + 1];
    m.cols_.push_back(e.j);
    m.blocks_.push_back(e.measurement.matrix());
  }
  for (std::size_t r = 0; r < static_cast<std::size_t>(n); ++r) {
    m.row_ptr_[r + 1] += m.row_ptr_[r];
  }
  return m;
}

/// Number of edges incident to each node.
inline std::vector<int> degree_matrix(const MeasurementGraph& g) {
  std::vector<int> degree(static_cast<std::size_t>(g.node_count()), 0);
  for (const Edge& e : g.edges()) {
    ++degree[static_cast<std::size_t>(e.i)];
    ++degree[static_cast<std::size_t>(e.j)];
  }
  return degree;
}

/// (D + I) kron I_3: the multiplier that is exact for noise-free data.
inline BlockDiagonal lambda_noise_free(const MeasurementGraph& g) {
  const auto degree = degree_matrix(g);
  BlockDiagonal lambda(g.node_count());
  for (Index i = 0; i < g.node_count(); ++i) {
    lambda[i] = (degree[static_cast<std::size_t>(i)] + 1.0) * Matrix3::Identity();
  }
  return lambda;
}

namespace detail {

inline void require_dimension(Index expected, Index actual, const char* what) {
  if (expected != actual) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(what) + ": expected " + std::to_string(expected) +
                    ", got " + std::to_string(actual));
  }
}

}  // namespace detail

/// y = R~ x for x with 3n rows (any column count).
template <typename Derived>
Eigen::Matrix<double, Eigen::Dynamic, Derived::ColsAtCompileTime> matvec(
    const PairwiseMatrix& m, const Eigen::MatrixBase<Derived>& x) {
  detail::require_dimension(m.dimension(), x.rows(), "matvec rows");
  Eigen::Matrix<double, Eigen::Dynamic, Derived::ColsAtCompileTime> y = x;
  m.for_each_upper([&](Index i, Index j, const Matrix3& b) {
    y.template middleRows<3>(3 * i).noalias() += b * x.template middleRows<3>(3 * j);
    y.template middleRows<3>(3 * j).noalias() +=
        b.transpose() * x.template middleRows<3>(3 * i);
  });
  return y;
}

/// y = (Lambda - R~) x.
template <typename Derived>
Eigen::Matrix<double, Eigen::Dynamic, Derived::ColsAtCompileTime> matvec(
    const BlockDiagonal& lambda, const PairwiseMatrix& m,
    const Eigen::MatrixBase<Derived>& x) {
  detail::require_dimension(m.node_count(), lambda.size(), "multiplier blocks");
  detail::require_dimension(m.dimension(), x.rows(), "matvec rows");
  Eigen::Matrix<double, Eigen::Dynamic, Derived::ColsAtCompileTime> y(x.rows(), x.cols());
  for (Index i = 0; i < lambda.size(); ++i) {
    y.template middleRows<3>(3 * i).noalias() =
        (lambda[i] - Matrix3::Identity()) * x.template middleRows<3>(3 * i);
  }
  m.for_each_upper([&](Index i, Index j, const Matrix3& b) {
    y.template middleRows<3>(3 * i).noalias() -= b * x.template middleRows<3>(3 * j);
    y.template middleRows<3>(3 * j).noalias() -=
        b.transpose() * x.template middleRows<3>(3 * i);
  });
  return y;
}

/// Assembles Lambda - R~ as a full (both triangles) sparse matrix.
inline SparseMatrix assemble_shifted(const BlockDiagonal& lambda,
                                     const PairwiseMatrix& m) {
  detail::require_dimension(m.node_count(), lambda.size(), "multiplier blocks");
  std::vector<Eigen::Triplet<double, int>> triplets;
  triplets.reserve(static_cast<std::size_t>(9 * (m.node_count() + 2 * m.stored_blocks())));
  for (Index i = 0; i < lambda.size(); ++i) {
    const Matrix3 d = lambda[i] - Matrix3::Identity();
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        triplets.emplace_back(static_cast<int>(3 * i + r), static_cast<int>(3 * i + c), d(r, c));
      }
    }
  }
  m.for_each_upper([&](Index i, Index j, const Matrix3& b) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        triplets.emplace_back(static_cast<int>(3 * i + r), static_cast<int>(3 * j + c), -b(r, c));
        triplets.emplace_back(static_cast<int>(3 * j + c), static_cast<int>(3 * i + r), -b(r, c));
      }
    }
  });
  SparseMatrix s(m.dimension(), m.dimension());
  s.setFromTriplets(triplets.begin(), triplets.end());
  return s;
}

/// Breadth-first reachability from node 0.
inline bool is_connected(const MeasurementGraph& g) {
  const Index n = g.node_count();
  if (n <= 1) return true;
  std::vector<std::vector<Index>> adjacency(static_cast<std::size_t>(n));
  for (const Edge& e : g.edges()) {
    adjacency[static_cast<std::size_t>(e.i)].push_back(e.j);
    adjacency[static_cast<std::size_t>(e.j)].push_back(e.i);
  }
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::deque<Index> queue{0};
  seen[0] = 1;
  Index reached = 1;
  while (!queue.empty()) {
    const Index u = queue.front();
    queue.pop_front();
    for (Index v : adjacency[static_cast<std::size_t>(u)]) {
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = 1;
        ++reached;
        queue.push_back(v);
      }
    }
  }
  return reached == n;
}

}  // namespace rotavg
