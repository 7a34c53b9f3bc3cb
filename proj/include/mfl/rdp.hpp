// Relaxed dynamic programming certificates on both description levels:
// value-function candidates, feedback maps, residuals of the inequality
//   V(x) >= V(f(x, kappa(x))) + alpha * cost(x, kappa(x)),
// the largest alpha supported by sampled states, and the measure-level
// certificate check.
#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mfl/common.hpp"
#include "mfl/convergence.hpp"
#include "mfl/kernel.hpp"
#include "mfl/measure.hpp"
#include "mfl/models.hpp"
#include "mfl/sampling.hpp"
#include "mfl/system.hpp"

namespace mfl {

// Nonnegative, permutation-invariant value-function candidate evaluated on
// agent states and on measures.
struct ValueCandidate {
  std::string name;
  double lip = 0.0;  // declared Lipschitz constant against the embedding gap
  std::function<double(const AgentState&)> micro;
  std::function<double(const AtomicMeasure&)> meanfield;
};

/// scale * variance; zero exactly at consensus.
inline ValueCandidate variance_value(double scale) {
  if (!(scale > 0.0))
    throw std::invalid_argument("variance_value: scale must be positive");
  ValueCandidate v;
  v.name = "variance_value";
  // Sampled bound (~0.6 on the unit box) with margin for the reference
  // Gaussian kernel; no closed form against the embedding gap.
  v.lip = 1.5 * scale;
  v.meanfield = [scale](const AtomicMeasure& mu) {
    return scale * mu.variance();
  };
  v.micro = [scale](const AgentState& x) {
    return scale * empirical(x).variance();
  };
  return v;
}

/// scale * (k_max - |embedding|^2): nonnegative because the squared
/// embedding norm of a probability measure never exceeds the kernel bound,
/// and Lipschitz against the embedding gap with constant 2 scale sqrt(k_max).
inline ValueCandidate kernel_cohesion_value(const Kernel& k, double scale) {
  if (!(scale > 0.0))
    throw std::invalid_argument("kernel_cohesion_value: scale must be positive");
  ValueCandidate v;
  v.name = "kernel_cohesion_value";
  v.lip = 2.0 * scale * std::sqrt(k.bound());
  const double k_max = k.bound();
  v.meanfield = [k, scale, k_max](const AtomicMeasure& mu) {
    return scale * (k_max - kme_inner(k, mu, mu));
  };
  v.micro = [k, scale, k_max](const AgentState& x) {
    const AtomicMeasure mu = empirical(x);
    return scale * (k_max - kme_inner(k, mu, mu));
  };
  return v;
}

// Permutation-invariant feedback map with outputs inside the control box.
struct FeedbackMap {
  std::string name;
  double lip = 0.0;          // declared Lipschitz constant, if one exists
  bool lip_declared = false; // grid argmin maps can jump at ties, so no
                             // global constant is declared for them
  std::function<ControlInput(const AgentState&)> micro;
  std::function<ControlInput(const AtomicMeasure&)> meanfield;
};

inline FeedbackMap zero_feedback(Eigen::Index control_dim) {
  FeedbackMap f;
  f.name = "zero";
  f.lip = 0.0;
  f.lip_declared = true;
  f.micro = [control_dim](const AgentState&) {
    return ControlInput::Zero(control_dim);
  };
  f.meanfield = [control_dim](const AtomicMeasure&) {
    return ControlInput::Zero(control_dim);
  };
  return f;
}

namespace detail {

// Tensor grid over [-u_max, u_max]^p scanned in lexicographic index order;
// strict improvement keeps the first minimizer, so ties resolve to the
// lexicographically smallest grid index and the map stays deterministic and
// permutation invariant.
template <typename Objective>
ControlInput grid_argmin(Eigen::Index control_dim, double u_max, int grid_res,
                         Objective&& objective) {
  std::vector<int> digit(static_cast<std::size_t>(control_dim), 0);
  ControlInput best_u = ControlInput::Zero(control_dim);
  double best_value = std::numeric_limits<double>::infinity();
  bool done = false;
  while (!done) {
    ControlInput u(control_dim);
    for (Eigen::Index c = 0; c < control_dim; ++c)
      u[c] = -u_max + 2.0 * u_max *
                          static_cast<double>(digit[static_cast<std::size_t>(c)]) /
                          static_cast<double>(grid_res - 1);
    const double value = objective(u);
    if (value < best_value) {
      best_value = value;
      best_u = u;
    }
    done = true;
    for (Eigen::Index c = control_dim - 1; c >= 0; --c) {
      if (++digit[static_cast<std::size_t>(c)] < grid_res) {
        done = false;
        break;
      }
      digit[static_cast<std::size_t>(c)] = 0;
    }
  }
  return best_u;
}

}  // namespace detail

/// One-step-lookahead feedback: minimizes cost(x, u) + V(f(x, u)) over a
/// tensor grid of the control box, identically on the measure level.
inline FeedbackMap greedy_feedback(const SystemModel& model,
                                   const ValueCandidate& value, int grid_res) {
  if (grid_res < 2)
    throw std::invalid_argument("greedy_feedback: grid resolution must be at least 2");
  if (std::pow(static_cast<double>(grid_res),
               static_cast<double>(model.control_dim)) > 1e6)
    throw std::invalid_argument(
        "greedy_feedback: control grid exceeds 1e6 points");
  FeedbackMap f;
  f.name = "greedy_grid";
  f.lip_declared = false;  // lipschitz experiments report sampled ratios
  f.micro = [model, value, grid_res](const AgentState& x) {
    return detail::grid_argmin(
        model.control_dim, model.u_max, grid_res, [&](const ControlInput& u) {
          return model.stage_cost_micro(x, u) +
                 value.micro(model.step_micro(x, u));
        });
  };
  f.meanfield = [model, value, grid_res](const AtomicMeasure& mu) {
    return detail::grid_argmin(
        model.control_dim, model.u_max, grid_res, [&](const ControlInput& u) {
          return model.stage_cost_meanfield(mu, u) +
                 value.meanfield(model.step_meanfield(mu, u));
        });
  };
  return f;
}

namespace detail {

inline void require_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::invalid_argument("rdp: alpha must lie in (0, 1]");
}

}  // namespace detail

/// Residual V(x) - V(f(x, kappa(x))) - alpha * cost(x, kappa(x)); the
/// inequality holds at x exactly when the residual is nonnegative.
inline double rdp_residual_micro(const SystemModel& model,
                                 const ValueCandidate& value,
                                 const FeedbackMap& feedback,
                                 const AgentState& x, double alpha) {
  detail::require_alpha(alpha);
  const ControlInput u = feedback.micro(x);
  return value.micro(x) - value.micro(step(model, x, u)) -
         alpha * stage_cost(model, x, u);
}

// Largest alpha supported by the sampled states. The residual is affine and
// decreasing in alpha wherever the stage cost is positive, so the exact
// answer on a sample set is the minimum decrease/cost ratio.
struct AlphaEstimate {
  double alpha = 1.0;     // min ratio clamped to (0, 1]
  double min_ratio = 0.0; // unclamped minimum ratio (meaningless if vacuous)
  bool vacuous = false;   // no sampled state had positive stage cost
  bool feasible = true;   // min ratio positive (or vacuous)
  int n_ratio_samples = 0;
  int n_zero_cost = 0;
};

/// Sampled ratio minimum over states with positive stage cost under the
/// feedback. States with (numerically) zero cost must individually satisfy
/// V(x) >= V(f(x, kappa(x))); a violation raises certificate_error, and
/// negative stage costs are rejected because the ratio loses its meaning.
inline AlphaEstimate max_alpha_micro(const SystemModel& model,
                                     const ValueCandidate& value,
                                     const FeedbackMap& feedback,
                                     Eigen::Index m, int n_samples,
                                     std::uint64_t seed, int jobs = 1) {
  if (n_samples < 1)
    throw std::invalid_argument("max_alpha_micro: needs at least one sample");
  struct Outcome {
    double ratio = 0.0;
    bool has_ratio = false;
    bool monotonicity_violated = false;
  };
  auto outcomes = parallel_map<Outcome>(
      static_cast<std::size_t>(n_samples), jobs, [&](std::size_t i) {
        Rng rng = sample_stream(seed, StreamTag::rdp,
                                static_cast<std::uint64_t>(m), i);
        const AgentState x =
            sample_agent_state(rng, model.box, m, clustered_sample(i));
        const ControlInput u = feedback.micro(x);
        const double cost = stage_cost(model, x, u);
        const double decrease = value.micro(x) - value.micro(step(model, x, u));
        Outcome out;
        if (cost > kZeroCostTolerance) {
          out.ratio = decrease / cost;
          out.has_ratio = true;
        } else if (cost < -kZeroCostTolerance) {
          throw certificate_error(
              "max_alpha_micro: negative stage cost under the feedback; "
              "the ratio certificate needs nonnegative costs");
        } else if (decrease < -kZeroCostTolerance) {
          out.monotonicity_violated = true;
        }
        return out;
      });

  AlphaEstimate estimate;
  double min_ratio = std::numeric_limits<double>::infinity();
  for (const Outcome& out : outcomes) {
    if (out.monotonicity_violated)
      throw certificate_error(
          "max_alpha_micro: a zero-cost state fails value monotonicity");
    if (out.has_ratio) {
      min_ratio = std::min(min_ratio, out.ratio);
      ++estimate.n_ratio_samples;
    } else {
      ++estimate.n_zero_cost;
    }
  }
  if (estimate.n_ratio_samples == 0) {
    estimate.vacuous = true;
    estimate.alpha = 1.0;
    return estimate;
  }
  estimate.min_ratio = min_ratio;
  estimate.feasible = min_ratio > 0.0;
  estimate.alpha = std::min(1.0, std::max(min_ratio, 0.0));
  return estimate;
}

// Measure-level certificate at a fixed alpha over a list of test measures.
struct RdpCertificate {
  double alpha = 0.0;
  std::vector<double> residuals;  // ordered as the input measures
  double min_residual = 0.0;
  bool pass = false;  // min residual >= -1e-9
};

inline constexpr double kRdpResidualTolerance = 1e-9;

inline RdpCertificate rdp_check_meanfield(
    const SystemModel& model, const ValueCandidate& value,
    const FeedbackMap& feedback, const std::vector<AtomicMeasure>& measures,
    double alpha, int jobs = 1) {
  detail::require_alpha(alpha);
  if (measures.empty())
    throw std::invalid_argument("rdp_check_meanfield: no test measures");
  RdpCertificate cert;
  cert.alpha = alpha;
  cert.residuals = parallel_map<double>(
      measures.size(), jobs, [&](std::size_t i) {
        const AtomicMeasure& mu = measures[i];
        const ControlInput u = feedback.meanfield(mu);
        return value.meanfield(mu) -
               value.meanfield(mf_step(model, mu, u)) -
               alpha * mf_stage_cost(model, mu, u);
      });
  cert.min_residual = *std::min_element(cert.residuals.begin(),
                                        cert.residuals.end());
  cert.pass = cert.min_residual >= -kRdpResidualTolerance;
  return cert;
}

/// Sampled lower bound on the Lipschitz constant of the value candidate
/// against the embedding gap alone; compare with the declared value.lip.
inline double lipschitz_check_value(const ValueCandidate& value,
                                    const SystemModel& model,
                                    const Kernel& kernel, Eigen::Index m,
                                    int n_pairs, std::uint64_t seed,
                                    int jobs = 1) {
  if (n_pairs < 1)
    throw std::invalid_argument("lipschitz_check_value: needs at least one pair");
  auto ratios = parallel_map<double>(
      static_cast<std::size_t>(n_pairs), jobs, [&](std::size_t i) {
        Rng rng = sample_stream(seed, StreamTag::lipschitz,
                                static_cast<std::uint64_t>(m) ^ 0x5ad5u, i);
        const AgentState x =
            sample_agent_state(rng, model.box, m, clustered_sample(i));
        const AgentState x2 =
            sample_agent_state(rng, model.box, m, rng.uniform() < 0.2);
        const double input = mmd(kernel, empirical(x), empirical(x2));
        if (input < 1e-10) return -1.0;
        return std::abs(value.micro(x) - value.micro(x2)) / input;
      });
  double best = -1.0;
  for (double r : ratios) best = std::max(best, r);
  if (best < 0.0)
    throw estimation_error("lipschitz_check_value: all sampled pairs degenerate");
  return best;
}

}  // namespace mfl
