// Finite-M multiagent control systems paired with their measure-level
// dynamics: permutation-equivariant transition maps, permutation-invariant
// stage costs, trajectories and finite-horizon total costs on both levels.
#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mfl/common.hpp"
#include "mfl/measure.hpp"
#include "mfl/state_box.hpp"

namespace mfl {

// Shared-broadcast control sequence over a finite horizon.
struct ControlSequence {
  std::vector<ControlInput> inputs;

  explicit ControlSequence(std::vector<ControlInput> in)
      : inputs(std::move(in)) {
    if (inputs.empty())
      throw std::invalid_argument("ControlSequence: horizon must be at least 1");
  }

  static ControlSequence zeros(int horizon, Eigen::Index control_dim) {
    if (horizon < 1)
      throw std::invalid_argument("ControlSequence: horizon must be at least 1");
    return ControlSequence(std::vector<ControlInput>(
        static_cast<std::size_t>(horizon), ControlInput::Zero(control_dim)));
  }

  int horizon() const { return static_cast<int>(inputs.size()); }
  const ControlInput& at(int n) const {
    return inputs[static_cast<std::size_t>(n)];
  }
};

// One system: a finite-M transition map, the measure-level map it converges
// to, stage costs on both levels, and the declared regularity constants.
// All callables are pure; models are immutable values.
struct SystemModel {
  std::string name;
  StateBox box;
  Eigen::Index control_dim = 0;
  double u_max = 0.0;
  double step_size = 0.0;
  // Declared constants. Where no closed form is available these are sampled
  // upper estimates with a 1.5x margin, validated by the test suite.
  double lip_dynamics = 0.0;
  double lip_stage_cost = 0.0;
  double stage_cost_bound = 0.0;
  // True when the finite-M map is the restriction of the measure-level map
  // to uniform empirical measures (then the one-step discrepancy vanishes).
  bool exact_restriction = false;

  std::function<AgentState(const AgentState&, const ControlInput&)> step_micro;
  std::function<AtomicMeasure(const AtomicMeasure&, const ControlInput&)>
      step_meanfield;
  std::function<double(const AgentState&, const ControlInput&)>
      stage_cost_micro;
  std::function<double(const AtomicMeasure&, const ControlInput&)>
      stage_cost_meanfield;

  SystemModel(std::string model_name, StateBox state_box)
      : name(std::move(model_name)), box(std::move(state_box)) {}

  void require_control(const ControlInput& u) const {
    if (u.size() != control_dim)
      throw std::invalid_argument(name + ": control has dimension " +
                                  std::to_string(u.size()) + ", expected " +
                                  std::to_string(control_dim));
    if ((u.array().abs() > u_max).any())
      throw std::invalid_argument(name + ": control outside [-u_max, u_max]");
  }
};

/// One microscopic step; the result stays inside the state box.
inline AgentState step(const SystemModel& model, const AgentState& x,
                       const ControlInput& u) {
  model.require_control(u);
  model.box.require_rows(x, "step");
  return model.step_micro(x, u);
}

/// Microscopic trajectory of length horizon+1 with element 0 equal to x0.
inline std::vector<AgentState> trajectory(const SystemModel& model,
                                          const AgentState& x0,
                                          const ControlSequence& useq) {
  std::vector<AgentState> traj;
  traj.reserve(static_cast<std::size_t>(useq.horizon()) + 1);
  traj.push_back(x0);
  for (int n = 0; n < useq.horizon(); ++n)
    traj.push_back(step(model, traj.back(), useq.at(n)));
  return traj;
}

inline double stage_cost(const SystemModel& model, const AgentState& x,
                         const ControlInput& u) {
  model.require_control(u);
  model.box.require_rows(x, "stage_cost");
  return model.stage_cost_micro(x, u);
}

/// Total cost sum_{n<N} cost(x(n), u(n)); the terminal state is not charged.
inline double total_cost(const SystemModel& model, const AgentState& x0,
                         const ControlSequence& useq) {
  const auto traj = trajectory(model, x0, useq);
  double acc = 0.0;
  for (int n = 0; n < useq.horizon(); ++n)
    acc += model.stage_cost_micro(traj[static_cast<std::size_t>(n)], useq.at(n));
  return acc;
}

/// One measure-level step: atoms move under the drift integrated against the
/// measure itself, weights are preserved.
inline AtomicMeasure mf_step(const SystemModel& model, const AtomicMeasure& mu,
                             const ControlInput& u) {
  model.require_control(u);
  model.box.require_rows(mu.atoms(), "mf_step");
  return model.step_meanfield(mu, u);
}

inline std::vector<AtomicMeasure> mf_trajectory(const SystemModel& model,
                                                const AtomicMeasure& mu0,
                                                const ControlSequence& useq) {
  std::vector<AtomicMeasure> traj;
  traj.reserve(static_cast<std::size_t>(useq.horizon()) + 1);
  traj.push_back(mu0);
  for (int n = 0; n < useq.horizon(); ++n)
    traj.push_back(mf_step(model, traj.back(), useq.at(n)));
  return traj;
}

inline double mf_stage_cost(const SystemModel& model, const AtomicMeasure& mu,
                            const ControlInput& u) {
  model.require_control(u);
  model.box.require_rows(mu.atoms(), "mf_stage_cost");
  return model.stage_cost_meanfield(mu, u);
}

inline double mf_total_cost(const SystemModel& model, const AtomicMeasure& mu0,
                            const ControlSequence& useq) {
  const auto traj = mf_trajectory(model, mu0, useq);
  double acc = 0.0;
  for (int n = 0; n < useq.horizon(); ++n)
    acc += model.stage_cost_meanfield(traj[static_cast<std::size_t>(n)],
                                      useq.at(n));
  return acc;
}

}  // namespace mfl
