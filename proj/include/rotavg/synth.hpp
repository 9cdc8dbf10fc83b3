#pragma once

// Seeded synthetic problems: noisy cycles around a circular trajectory,
// connected Erdos-Renyi graphs with Haar-random ground truth, and the
// principal-angle study comparing noisy and noise-free bottom eigenspaces.

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "rotavg/connectivity.hpp"
#include "rotavg/cycle.hpp"
#include "rotavg/eigensolver.hpp"
#include "rotavg/error.hpp"
#include "rotavg/graph.hpp"
#include "rotavg/primal_dual.hpp"
#include "rotavg/rng.hpp"
#include "rotavg/so3.hpp"

namespace rotavg {

struct CycleSpec {
  Index n = 3;
  double sigma = 0.0;  // std-dev of the perturbation angle, radians
  std::uint64_t seed = 0;
};

struct GraphSpec {
  Index n = 2;
  double edge_probability = 1.0;
  std::uint64_t seed = 0;
  double sigma = 0.0;
};

struct SynthCycle {
  CycleProblem problem;
  BlockVector ground_truth;
};

struct SynthGraph {
  MeasurementGraph graph;
  BlockVector ground_truth;
  PairwiseMatrix noise_free_matrix;
};

namespace synth_detail {

// Independent streams per purpose, so changing sigma never changes the
// topology or the ground truth drawn from the same seed.
enum Stream : std::uint64_t { kTopology = 1, kTruth = 2, kNoise = 3 };

inline Vector3 random_axis(CounterRng& rng) {
  Vector3 v;
  do {
    v = Vector3(rng.normal(), rng.normal(), rng.normal());
  } while (v.norm() < 1e-12);
  return v.normalized();
}

/// Axis uniform on the sphere, angle ~ Normal(0, sigma).
inline Rotation perturbation(CounterRng& rng, double sigma) {
  const Vector3 axis = random_axis(rng);
  const double angle = sigma * rng.normal();
  return exp_axis_angle(axis, angle);
}

/// Haar-uniform rotation: QR of a Gaussian matrix with the signs of R's
/// diagonal moved into Q, then a determinant fix.
inline Rotation haar_rotation(CounterRng& rng) {
  Matrix3 a;
  for (int c = 0; c < 3; ++c) {
    for (int r = 0; r < 3; ++r) a(r, c) = rng.normal();
  }
  const Eigen::HouseholderQR<Matrix3> qr(a);
  Matrix3 q = qr.householderQ();
  const Matrix3 r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < 3; ++i) {
    if (r(i, i) < 0.0) q.col(i) = -q.col(i);
  }
  if (q.determinant() < 0.0) q.col(0) = -q.col(0);
  return Rotation::unchecked(q);
}

}  // namespace synth_detail

inline SynthCycle generate_cycle(const CycleSpec& spec) {
  if (spec.n < 3) throw Error(ErrorCode::kInvalidArgument, "a cycle needs n >= 3");
  if (!(spec.sigma >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigma must be >= 0");
  CounterRng noise = CounterRng(spec.seed).split(synth_detail::kNoise);
  const double step = 2.0 * kPi / static_cast<double>(spec.n);

  BlockVector truth(spec.n);
  for (Index i = 0; i < spec.n; ++i) {
    truth.block(i) = exp_axis_angle(Vector3::UnitZ(), step * static_cast<double>(i)).matrix();
  }
  std::vector<Rotation> measurements;
  measurements.reserve(static_cast<std::size_t>(spec.n));
  for (Index i = 0; i < spec.n; ++i) {
    const Index j = (i + 1) % spec.n;
    const Matrix3 relative = truth.block(i) * truth.block(j).transpose();
    measurements.push_back(synth_detail::perturbation(noise, spec.sigma) *
                           Rotation::unchecked(relative));
  }
  return {CycleProblem(std::move(measurements)), std::move(truth)};
}

inline SynthGraph generate_graph(const GraphSpec& spec) {
  if (spec.n < 2) throw Error(ErrorCode::kInvalidArgument, "a graph needs n >= 2");
  if (!(spec.edge_probability > 0.0 && spec.edge_probability <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "edge probability must lie in (0, 1]");
  }
  if (!(spec.sigma >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigma must be >= 0");
  const CounterRng root(spec.seed);

  constexpr int kAttempts = 100;
  std::vector<std::pair<Index, Index>> edges;
  bool connected = false;
  for (int attempt = 0; attempt < kAttempts && !connected; ++attempt) {
    CounterRng topology = root.split(synth_detail::kTopology).split(static_cast<std::uint64_t>(attempt));
    edges.clear();
    MeasurementGraph probe(spec.n);
    for (Index i = 0; i < spec.n; ++i) {
      for (Index j = i + 1; j < spec.n; ++j) {
        if (topology.uniform() < spec.edge_probability) {
          edges.emplace_back(i, j);
          probe.add_edge(i, j, Rotation::identity());
        }
      }
    }
    connected = is_connected(probe);
  }
  if (!connected) {
    throw Error(ErrorCode::kGeneration,
                "no connected graph after " + std::to_string(kAttempts) +
                    " attempts at edge probability " + std::to_string(spec.edge_probability));
  }

  CounterRng truth_rng = root.split(synth_detail::kTruth);
  BlockVector truth(spec.n);
  for (Index i = 0; i < spec.n; ++i) truth.block(i) = synth_detail::haar_rotation(truth_rng).matrix();

  CounterRng noise = root.split(synth_detail::kNoise);
  MeasurementGraph noisy(spec.n);
  MeasurementGraph clean(spec.n);
  for (const auto& [i, j] : edges) {
    const Rotation relative = Rotation::unchecked(truth.block(i) * truth.block(j).transpose());
    clean.add_edge(i, j, relative);
    noisy.add_edge(i, j, synth_detail::perturbation(noise, spec.sigma) * relative);
  }
  return {std::move(noisy), std::move(truth), build_pairwise_matrix(clean)};
}

struct PrincipalAngleTrial {
  int trial = 0;
  Index n = 0;
  double sigma = 0.0;
  double edge_probability = 0.0;
  double fiedler = 0.0;
  double cosine = 0.0;
};

struct PrincipalAngleBin {
  int bin = 0;  // index into kFiedlerBinEdges
  double sigma = 0.0;
  double mean_cosine = 0.0;
  int count = 0;
};

struct PrincipalAngleStudy {
  std::vector<PrincipalAngleTrial> trials;
  std::vector<PrincipalAngleBin> bins;
  int failed_trials = 0;  // generation errors, counted per (trial, sigma)
};

/// Lower edges of the Fiedler-value bins [0,1), [1,3), [3,10), [10,inf).
inline constexpr double kFiedlerBinEdges[] = {0.0, 1.0, 3.0, 10.0};
inline constexpr int kFiedlerBins = 4;

inline int fiedler_bin(double rho) {
  int bin = 0;
  for (int b = 0; b < kFiedlerBins; ++b) {
    if (rho >= kFiedlerBinEdges[b]) bin = b;
  }
  return bin;
}

inline std::string fiedler_bin_label(int bin) {
  static const char* labels[] = {"[0,1)", "[1,3)", "[3,10)", "[10,inf)"};
  return labels[bin];
}

/// Edge probabilities are drawn log-uniformly from this range so that every
/// Fiedler bin is populated for n around 50.
inline constexpr double kMinEdgeProbability = 0.06;
inline constexpr double kMaxEdgeProbability = 0.6;

/// Cosine of the principal angle between the kernel of Lambda_nf - R~_nf and
/// the bottom three eigenvectors of Lambda_nf - R~, for each trial and sigma.
/// Each trial uses one topology and ground truth for all sigmas.
inline PrincipalAngleStudy principal_angle_experiment(Index n, const std::vector<double>& sigmas,
                                                      int trials, std::uint64_t seed) {
  if (trials < 1) throw Error(ErrorCode::kInvalidArgument, "trials must be >= 1");
  if (n < 3) throw Error(ErrorCode::kInvalidArgument, "n must be >= 3");
  PrincipalAngleStudy study;
  std::vector<std::vector<double>> sums(sigmas.size(), std::vector<double>(kFiedlerBins, 0.0));
  std::vector<std::vector<int>> counts(sigmas.size(), std::vector<int>(kFiedlerBins, 0));

  for (int t = 0; t < trials; ++t) {
    CounterRng trial_rng(seed, static_cast<std::uint64_t>(t));
    const double log_lo = std::log(kMinEdgeProbability);
    const double log_hi = std::log(kMaxEdgeProbability);
    const double p = std::exp(trial_rng.uniform(log_lo, log_hi));
    const std::uint64_t graph_seed = trial_rng.next_u64();

    for (std::size_t s = 0; s < sigmas.size(); ++s) {
      SynthGraph synth = [&]() -> SynthGraph {
        try {
          return generate_graph({n, p, graph_seed, sigmas[s]});
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kGeneration) throw;
          return {MeasurementGraph(), BlockVector(), PairwiseMatrix()};
        }
      }();
      if (synth.graph.node_count() == 0) {
        ++study.failed_trials;
        continue;
      }
      const BlockDiagonal lambda_nf = lambda_noise_free(synth.graph);
      const Eigen::MatrixXd u_nf = synth.ground_truth.stacked() / std::sqrt(static_cast<double>(n));
      const EigenResult eig =
          smallest_eigenpairs(assemble_shifted(lambda_nf, build_pairwise_matrix(synth.graph)), 3, -1e-6);

      PrincipalAngleTrial row;
      row.trial = t;
      row.n = n;
      row.sigma = sigmas[s];
      row.edge_probability = p;
      row.fiedler = fiedler_value(synth.graph);
      row.cosine = principal_angle_cosine(eig.eigenvectors, u_nf);
      study.trials.push_back(row);

      const int bin = fiedler_bin(row.fiedler);
      sums[s][static_cast<std::size_t>(bin)] += row.cosine;
      ++counts[s][static_cast<std::size_t>(bin)];
    }
  }

  for (std::size_t s = 0; s < sigmas.size(); ++s) {
    for (int b = 0; b < kFiedlerBins; ++b) {
      const int c = counts[s][static_cast<std::size_t>(b)];
      study.bins.push_back({b, sigmas[s], c > 0 ? sums[s][static_cast<std::size_t>(b)] / c : 0.0, c});
    }
  }
  return study;
}

}  // namespace rotavg
