// Seeded samplers shared by all experiments. Every sample owns an RNG stream
// derived from (master seed, experiment tag, M, sample index), so reports are
// bit-reproducible no matter how samples are scheduled across workers.
#pragma once

#include <algorithm>
#include <cstdint>

#include "mfl/common.hpp"
#include "mfl/measure.hpp"
#include "mfl/state_box.hpp"
#include "mfl/system.hpp"

namespace mfl {

// Stream tags keep the experiments' RNG streams disjoint.
enum class StreamTag : std::uint64_t {
  one_step = 1,
  trajectory_bound = 2,
  cost = 3,
  stage_cost = 4,
  embedding = 5,
  lipschitz = 6,
  rdp = 7,
  simulate = 8,
  measures = 9,
};

inline Rng sample_stream(std::uint64_t seed, StreamTag tag, std::uint64_t m,
                         std::uint64_t index) {
  return Rng::stream(seed, static_cast<std::uint64_t>(tag), m, index);
}

inline Point sample_point(Rng& rng, const StateBox& box) {
  Point x(box.dim());
  for (Eigen::Index c = 0; c < box.dim(); ++c)
    x[c] = rng.uniform(box.lower()[c], box.upper()[c]);
  return x;
}

// Every fifth sample is clustered: all agents inside a small ball. Clustered
// states probe the near-degenerate empirical measures that i.i.d. uniform
// sampling essentially never produces.
inline bool clustered_sample(std::uint64_t index) { return index % 5 == 4; }

/// M agents, either i.i.d. uniform over the box or packed in a ball of
/// radius 2.5% of the box diameter (clamped to the box).
inline AgentState sample_agent_state(Rng& rng, const StateBox& box,
                                     Eigen::Index m, bool clustered) {
  AgentState x(m, box.dim());
  if (!clustered) {
    for (Eigen::Index i = 0; i < m; ++i)
      x.row(i) = sample_point(rng, box).transpose();
    return x;
  }
  const Point center = sample_point(rng, box);
  const double radius = 0.025 * box.diameter();
  for (Eigen::Index i = 0; i < m; ++i) {
    Point offset(box.dim());
    for (Eigen::Index c = 0; c < box.dim(); ++c)
      offset[c] = rng.uniform(-radius, radius);
    x.row(i) = box.clamp(center + offset).transpose();
  }
  return x;
}

inline ControlInput sample_control(Rng& rng, Eigen::Index control_dim,
                                   double u_max) {
  ControlInput u(control_dim);
  for (Eigen::Index c = 0; c < control_dim; ++c)
    u[c] = rng.uniform(-u_max, u_max);
  return u;
}

inline ControlSequence sample_control_sequence(Rng& rng,
                                               Eigen::Index control_dim,
                                               double u_max, int horizon) {
  std::vector<ControlInput> inputs;
  inputs.reserve(static_cast<std::size_t>(horizon));
  for (int n = 0; n < horizon; ++n)
    inputs.push_back(sample_control(rng, control_dim, u_max));
  return ControlSequence(std::move(inputs));
}

/// Random atomic measure: 1..max_atoms uniform atoms with normalized random
/// weights.
inline AtomicMeasure sample_atomic_measure(Rng& rng, const StateBox& box,
                                           Eigen::Index max_atoms) {
  const Eigen::Index n =
      1 + static_cast<Eigen::Index>(rng.uniform_index(
              static_cast<std::uint64_t>(max_atoms)));
  Eigen::MatrixXd atoms(n, box.dim());
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    atoms.row(i) = sample_point(rng, box).transpose();
    w[i] = rng.uniform(0.05, 1.0);
  }
  w /= w.sum();
  return AtomicMeasure(std::move(atoms), std::move(w));
}

/// M i.i.d. draws from a reference atomic measure (inverse-CDF sampling on
/// the atom weights), returned as a uniform empirical measure.
inline AtomicMeasure sample_iid_from(Rng& rng, const AtomicMeasure& reference,
                                     Eigen::Index m) {
  std::vector<double> cumulative(static_cast<std::size_t>(reference.size()));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < reference.size(); ++i) {
    acc += reference.weights()[i];
    cumulative[static_cast<std::size_t>(i)] = acc;
  }
  cumulative.back() = 1.0;
  Eigen::MatrixXd atoms(m, reference.dim());
  for (Eigen::Index i = 0; i < m; ++i) {
    const double t = rng.uniform();
    const auto it =
        std::upper_bound(cumulative.begin(), cumulative.end(), t);
    const Eigen::Index j = static_cast<Eigen::Index>(
        std::min<std::ptrdiff_t>(it - cumulative.begin(),
                                 reference.size() - 1));
    atoms.row(i) = reference.atoms().row(j);
  }
  return AtomicMeasure::uniform(std::move(atoms));
}

}  // namespace mfl
