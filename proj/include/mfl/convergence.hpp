// Convergence diagnostics for the measure-level limit of a finite-M system:
// sampled one-step discrepancies, the geometric trajectory bound, stage and
// total cost gaps, the law-of-large-numbers embedding rate, and sampled
// Lipschitz estimation. Sampled maxima are lower bounds on the suprema they
// stand in for, so their decay is necessary evidence for convergence.
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mfl/common.hpp"
#include "mfl/kernel.hpp"
#include "mfl/measure.hpp"
#include "mfl/sampling.hpp"
#include "mfl/system.hpp"

namespace mfl {

struct SampleStats {
  double max = 0.0;
  double mean = 0.0;
  double median = 0.0;
};

/// Order-independent reduction: values are sorted before aggregation.
inline SampleStats summarize(std::vector<double> values) {
  if (values.empty())
    throw std::invalid_argument("summarize: no samples");
  std::sort(values.begin(), values.end());
  SampleStats s;
  s.max = values.back();
  double acc = 0.0;
  for (double v : values) acc += v;
  s.mean = acc / static_cast<double>(values.size());
  const std::size_t n = values.size();
  s.median = (n % 2 == 1) ? values[n / 2]
                          : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  return s;
}

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // root-mean-square fit residual in log space
  bool valid = false;     // at least two entries with positive statistic
};

/// Least-squares slope of log(statistic) against log(M). Entries with a
/// nonpositive statistic are excluded (exactly matching models produce 0).
inline RateFit fit_loglog(const std::vector<std::pair<double, double>>& points) {
  std::vector<std::pair<double, double>> logs;
  for (const auto& [m, stat] : points)
    if (stat > 0.0) logs.emplace_back(std::log(m), std::log(stat));
  RateFit fit;
  if (logs.size() < 2) return fit;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : logs) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(logs.size());
  const double denom = n * sxx - sx * sx;
  if (denom <= 0.0) return fit;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  double rss = 0.0;
  for (const auto& [x, y] : logs) {
    const double e = y - (fit.intercept + fit.slope * x);
    rss += e * e;
  }
  fit.residual = std::sqrt(rss / n);
  fit.valid = true;
  return fit;
}

struct ConvergenceEntry {
  Eigen::Index m = 0;
  SampleStats stats;
  int n_samples = 0;
};

struct ConvergenceReport {
  std::string experiment;
  std::vector<ConvergenceEntry> entries;  // strictly increasing in m
  std::string fit_statistic;              // "max" or "median"
  RateFit fit;
  std::uint64_t seed = 0;
};

namespace detail {

inline void require_increasing(const std::vector<Eigen::Index>& ms) {
  if (ms.empty())
    throw std::invalid_argument("convergence: empty M schedule");
  for (std::size_t i = 1; i < ms.size(); ++i)
    if (ms[i] <= ms[i - 1])
      throw std::invalid_argument("convergence: M schedule must be strictly increasing");
}

inline ConvergenceReport assemble_report(std::string experiment,
                                         const std::vector<Eigen::Index>& ms,
                                         std::vector<SampleStats> stats,
                                         int n_samples, std::uint64_t seed,
                                         const std::string& fit_statistic) {
  ConvergenceReport report;
  report.experiment = std::move(experiment);
  report.fit_statistic = fit_statistic;
  report.seed = seed;
  std::vector<std::pair<double, double>> points;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    report.entries.push_back({ms[i], stats[i], n_samples});
    const double stat =
        fit_statistic == "median" ? stats[i].median : stats[i].max;
    points.emplace_back(static_cast<double>(ms[i]), stat);
  }
  report.fit = fit_loglog(points);
  return report;
}

}  // namespace detail

/// Sampled one-step discrepancy at population size M: the maximum mean
/// discrepancy between the empirical image of the finite-M step and the
/// measure-level image of the empirical measure, over sampled (state, input)
/// pairs.
inline SampleStats one_step_discrepancy(const SystemModel& model,
                                        const Kernel& kernel, Eigen::Index m,
                                        int n_samples, std::uint64_t seed,
                                        int jobs = 1) {
  if (m < 2)
    throw std::invalid_argument("one_step_discrepancy: M must be at least 2");
  if (n_samples < 1)
    throw std::invalid_argument("one_step_discrepancy: needs at least one sample");
  auto values = parallel_map<double>(
      static_cast<std::size_t>(n_samples), jobs, [&](std::size_t i) {
        Rng rng = sample_stream(seed, StreamTag::one_step,
                                static_cast<std::uint64_t>(m), i);
        const AgentState x =
            sample_agent_state(rng, model.box, m, clustered_sample(i));
        const ControlInput u =
            sample_control(rng, model.control_dim, model.u_max);
        const AtomicMeasure micro_image = empirical(step(model, x, u));
        const AtomicMeasure mf_image = mf_step(model, empirical(x), u);
        return mmd(kernel, micro_image, mf_image);
      });
  return summarize(std::move(values));
}

inline ConvergenceReport one_step_report(const SystemModel& model,
                                         const Kernel& kernel,
                                         const std::vector<Eigen::Index>& ms,
                                         int n_samples, std::uint64_t seed,
                                         int jobs = 1) {
  detail::require_increasing(ms);
  std::vector<SampleStats> stats;
  for (Eigen::Index m : ms)
    stats.push_back(one_step_discrepancy(model, kernel, m, n_samples, seed, jobs));
  return detail::assemble_report("one-step", ms, std::move(stats), n_samples,
                                 seed, "max");
}

// One instance of the geometric trajectory bound: the endpoint discrepancy
// lhs is controlled by the L_f-weighted sum of the per-step residuals,
//   lhs <= sum_{n=1..N} L_f^(n-1) * residual(N-n),
// where residual(j) is the one-step defect of the empirical trajectory
// against the measure-level map. For N=1 the bound is an identity.
struct TrajectoryBoundCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  std::vector<double> residuals;  // residual(j), j = 0..N-1
  double lip_dynamics = 0.0;

  bool holds(double tol = 1e-9) const { return lhs <= rhs + tol; }
};

inline TrajectoryBoundCheck trajectory_bound_check(const SystemModel& model,
                                                   const Kernel& kernel,
                                                   const AgentState& x0,
                                                   const ControlSequence& useq) {
  const int horizon = useq.horizon();
  const auto micro = trajectory(model, x0, useq);
  std::vector<AtomicMeasure> hats;
  hats.reserve(micro.size());
  for (const auto& state : micro) hats.push_back(empirical(state));
  const auto mf = mf_trajectory(model, hats.front(), useq);

  TrajectoryBoundCheck check;
  check.lip_dynamics = model.lip_dynamics;
  check.lhs = mmd(kernel, hats.back(), mf.back());
  check.residuals.resize(static_cast<std::size_t>(horizon));
  for (int n = 0; n < horizon; ++n)
    check.residuals[static_cast<std::size_t>(n)] = mmd(
        kernel, hats[static_cast<std::size_t>(n + 1)],
        mf_step(model, hats[static_cast<std::size_t>(n)], useq.at(n)));
  double weight = 1.0;
  for (int n = 1; n <= horizon; ++n) {
    check.rhs += weight * check.residuals[static_cast<std::size_t>(horizon - n)];
    weight *= model.lip_dynamics;
  }
  return check;
}

/// Sampled gap between the finite-M total cost and the measure-level total
/// cost started from the empirical measure, over random initial states and
/// control sequences.
inline ConvergenceReport cost_convergence(const SystemModel& model,
                                          const Kernel& kernel,
                                          const std::vector<Eigen::Index>& ms,
                                          int horizon, int n_samples,
                                          std::uint64_t seed, int jobs = 1) {
  (void)kernel;  // cost gaps need no embedding; kept for a uniform interface
  detail::require_increasing(ms);
  if (horizon < 1)
    throw std::invalid_argument("cost_convergence: horizon must be at least 1");
  if (n_samples < 1)
    throw std::invalid_argument("cost_convergence: needs at least one sample");
  std::vector<SampleStats> stats;
  for (Eigen::Index m : ms) {
    auto values = parallel_map<double>(
        static_cast<std::size_t>(n_samples), jobs, [&](std::size_t i) {
          Rng rng = sample_stream(seed, StreamTag::cost,
                                  static_cast<std::uint64_t>(m), i);
          const AgentState x0 =
              sample_agent_state(rng, model.box, m, clustered_sample(i));
          const ControlSequence useq = sample_control_sequence(
              rng, model.control_dim, model.u_max, horizon);
          const double micro = total_cost(model, x0, useq);
          const double mf = mf_total_cost(model, empirical(x0), useq);
          return std::abs(micro - mf);
        });
    stats.push_back(summarize(std::move(values)));
  }
  return detail::assemble_report("cost-convergence", ms, std::move(stats),
                                 n_samples, seed, "max");
}

/// Sampled gap between the finite-M stage cost and the measure-level stage
/// cost of the empirical measure.
inline ConvergenceReport stage_cost_convergence(
    const SystemModel& model, const Kernel& kernel,
    const std::vector<Eigen::Index>& ms, int n_samples, std::uint64_t seed,
    int jobs = 1) {
  (void)kernel;
  detail::require_increasing(ms);
  if (n_samples < 1)
    throw std::invalid_argument("stage_cost_convergence: needs at least one sample");
  std::vector<SampleStats> stats;
  for (Eigen::Index m : ms) {
    auto values = parallel_map<double>(
        static_cast<std::size_t>(n_samples), jobs, [&](std::size_t i) {
          Rng rng = sample_stream(seed, StreamTag::stage_cost,
                                  static_cast<std::uint64_t>(m), i);
          const AgentState x =
              sample_agent_state(rng, model.box, m, clustered_sample(i));
          const ControlInput u =
              sample_control(rng, model.control_dim, model.u_max);
          return std::abs(stage_cost(model, x, u) -
                          mf_stage_cost(model, empirical(x), u));
        });
    stats.push_back(summarize(std::move(values)));
  }
  return detail::assemble_report("stage-cost-convergence", ms,
                                 std::move(stats), n_samples, seed, "max");
}

/// Law-of-large-numbers rate of empirical embeddings: for each M, draw M
/// i.i.d. atoms from the reference measure and record the discrepancy to the
/// reference; the median over seeds decays like M^(-1/2).
inline ConvergenceReport embedding_convergence(
    const Kernel& kernel, const AtomicMeasure& reference,
    const std::vector<Eigen::Index>& ms, int n_seeds, std::uint64_t seed,
    int jobs = 1) {
  detail::require_increasing(ms);
  if (n_seeds < 1)
    throw std::invalid_argument("embedding_convergence: needs at least one seed");
  kernel.domain().require_rows(reference.atoms(), "embedding_convergence");
  const double ref_self = kme_inner(kernel, reference, reference);
  std::vector<SampleStats> stats;
  for (Eigen::Index m : ms) {
    auto values = parallel_map<double>(
        static_cast<std::size_t>(n_seeds), jobs, [&](std::size_t s) {
          Rng rng = sample_stream(seed, StreamTag::embedding,
                                  static_cast<std::uint64_t>(m), s);
          const AtomicMeasure sample = sample_iid_from(rng, reference, m);
          const double radicand = kme_inner(kernel, sample, sample) -
                                  2.0 * kme_inner(kernel, sample, reference) +
                                  ref_self;
          return detail::sqrt_clamped(radicand, "embedding_convergence");
        });
    stats.push_back(summarize(std::move(values)));
  }
  return detail::assemble_report("embedding-convergence", ms, std::move(stats),
                                 n_seeds, seed, "median");
}

enum class LipschitzTarget { dynamics, stage_cost };

/// Sampled lower bound on a Lipschitz constant: the largest ratio of output
/// distance to embedded product-norm input distance over random pairs.
/// Every fourth pair reuses the same control so the state-only direction is
/// probed directly. Pairs closer than 1e-10 in input distance are skipped.
template <typename OutputDistance>
double estimate_lipschitz_map(const SystemModel& model, const Kernel& kernel,
                              Eigen::Index m, int n_pairs, std::uint64_t seed,
                              OutputDistance&& output_distance, int jobs = 1) {
  if (n_pairs < 1)
    throw std::invalid_argument("estimate_lipschitz: needs at least one pair");
  auto ratios = parallel_map<double>(
      static_cast<std::size_t>(n_pairs), jobs, [&](std::size_t i) {
        Rng rng = sample_stream(seed, StreamTag::lipschitz,
                                static_cast<std::uint64_t>(m), i);
        const AgentState x =
            sample_agent_state(rng, model.box, m, clustered_sample(i));
        const AgentState x2 =
            sample_agent_state(rng, model.box, m, rng.uniform() < 0.2);
        const ControlInput u =
            sample_control(rng, model.control_dim, model.u_max);
        const ControlInput u2 =
            (i % 4 == 3) ? u : sample_control(rng, model.control_dim, model.u_max);
        const double embed_gap = mmd(kernel, empirical(x), empirical(x2));
        const double input =
            std::sqrt(embed_gap * embed_gap + (u - u2).squaredNorm());
        if (input < 1e-10) return -1.0;  // degenerate pair, skipped
        return output_distance(x, u, x2, u2) / input;
      });
  double best = -1.0;
  for (double r : ratios) best = std::max(best, r);
  if (best < 0.0)
    throw estimation_error("estimate_lipschitz: all sampled pairs degenerate");
  return best;
}

inline double estimate_lipschitz(const SystemModel& model, const Kernel& kernel,
                                 LipschitzTarget target, Eigen::Index m,
                                 int n_pairs, std::uint64_t seed, int jobs = 1) {
  if (target == LipschitzTarget::dynamics) {
    return estimate_lipschitz_map(
        model, kernel, m, n_pairs, seed,
        [&](const AgentState& x, const ControlInput& u, const AgentState& x2,
            const ControlInput& u2) {
          return mmd(kernel, empirical(step(model, x, u)),
                     empirical(step(model, x2, u2)));
        },
        jobs);
  }
  return estimate_lipschitz_map(
      model, kernel, m, n_pairs, seed,
      [&](const AgentState& x, const ControlInput& u, const AgentState& x2,
          const ControlInput& u2) {
        return std::abs(stage_cost(model, x, u) - stage_cost(model, x2, u2));
      },
      jobs);
}

}  // namespace mfl
