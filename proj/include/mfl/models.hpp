// Built-in model zoo: interacting-agent systems with analytically known
// measure-level dynamics, plus the stage costs they are paired with.
//
// bounded_confidence and cucker_smale_discrete route their microscopic step
// through the same drift code as the measure-level step (with weights 1/M),
// so the finite-M map is bit-exactly the restriction of the measure map to
// uniform empirical measures. linear_consensus deliberately carries an
// M/(M-1) self-exclusion factor, which makes its one-step gap Theta(1/M) and
// gives the convergence experiments a known rate target.
#pragma once

#include <cmath>
#include <sstream>

#include "mfl/kernel.hpp"
#include "mfl/measure.hpp"
#include "mfl/system.hpp"

namespace mfl {

// Stage cost on both description levels, with declared regularity constants.
struct StageCost {
  std::string name;
  double lambda_u = 0.0;
  double lip = 0.0;    // declared Lipschitz constant (embedded product norm)
  double bound = 0.0;  // declared uniform bound
  std::function<double(const AgentState&, const ControlInput&)> micro;
  std::function<double(const AtomicMeasure&, const ControlInput&)> meanfield;
};

/// Spread around the mean plus a control penalty:
///   cost(x, u) = (1/M) sum_i |x_i - mean|^2 + lambda_u |u|^2.
/// The microscopic cost is exactly the variance of the empirical measure, so
/// both levels evaluate through the same code path.
inline StageCost variance_cost(const StateBox& box, Eigen::Index control_dim,
                               double u_max, double lambda_u) {
  if (lambda_u < 0.0)
    throw std::invalid_argument("variance_cost: lambda_u must be nonnegative");
  StageCost c;
  c.name = "variance";
  c.lambda_u = lambda_u;
  const double control_sup =
      lambda_u * static_cast<double>(control_dim) * u_max * u_max;
  // Per-coordinate variance on [lo, hi] is at most (hi-lo)^2/4.
  c.bound = box.diameter() * box.diameter() / 4.0 + control_sup;
  // No closed form against the MMD input distance for the reference Gaussian
  // kernel (bandwidth = half the box edge); sampled bound ~0.5 at 1.5x margin,
  // checked by the test suite.
  c.lip = 1.5 * box.diameter() +
          2.0 * lambda_u * std::sqrt(static_cast<double>(control_dim)) * u_max;
  c.meanfield = [lambda_u](const AtomicMeasure& mu, const ControlInput& u) {
    return mu.variance() + lambda_u * u.squaredNorm();
  };
  c.micro = [lambda_u](const AgentState& x, const ControlInput& u) {
    return empirical(x).variance() + lambda_u * u.squaredNorm();
  };
  return c;
}

/// Negative squared embedding norm plus a control penalty:
///   cost(x, u) = -(1/M^2) sum_ij k(x_i, x_j) + lambda_u |u|^2,
/// which rewards cohesion and is MMD-Lipschitz with constant 2 sqrt(k_max).
inline StageCost kernel_cohesion_cost(const Kernel& k, Eigen::Index control_dim,
                                      double u_max, double lambda_u) {
  if (lambda_u < 0.0)
    throw std::invalid_argument("kernel_cohesion_cost: lambda_u must be nonnegative");
  StageCost c;
  c.name = "kernel_cohesion";
  c.lambda_u = lambda_u;
  c.bound = k.bound() +
            lambda_u * static_cast<double>(control_dim) * u_max * u_max;
  c.lip = std::max(2.0 * std::sqrt(k.bound()),
                   2.0 * lambda_u * std::sqrt(static_cast<double>(control_dim)) * u_max);
  c.meanfield = [k, lambda_u](const AtomicMeasure& mu, const ControlInput& u) {
    return -kme_inner(k, mu, mu) + lambda_u * u.squaredNorm();
  };
  c.micro = [k, lambda_u](const AgentState& x, const ControlInput& u) {
    const AtomicMeasure mu = empirical(x);
    return -kme_inner(k, mu, mu) + lambda_u * u.squaredNorm();
  };
  return c;
}

namespace detail {

inline void attach_cost(SystemModel& model, const StageCost& cost) {
  model.stage_cost_micro = cost.micro;
  model.stage_cost_meanfield = cost.meanfield;
  model.lip_stage_cost = cost.lip;
  model.stage_cost_bound = cost.bound;
}

}  // namespace detail

/// Drift toward the population mean with self-exclusion scaling M/(M-1):
///   x_i+ = clamp(x_i + h (M/(M-1)) (mean(x) - x_i) + u).
/// The measure-level map drops the M/(M-1) factor, so the one-step gap is
/// exactly of order 1/M. Control is a shared additive shift (p = dim).
inline SystemModel linear_consensus(const StateBox& box, double h, double u_max,
                                    const StageCost& cost) {
  if (!(h > 0.0 && h <= 1.0))
    throw std::invalid_argument("linear_consensus: step size must lie in (0, 1]");
  if (!(u_max > 0.0))
    throw std::invalid_argument("linear_consensus: u_max must be positive");
  SystemModel model("linear_consensus", box);
  model.control_dim = box.dim();
  model.u_max = u_max;
  model.step_size = h;
  // Sampled bound (~2.45) with 1.5x margin for the reference Gaussian kernel
  // (bandwidth = half the box edge); no closed form is available.
  model.lip_dynamics = 3.7;
  model.exact_restriction = false;
  detail::attach_cost(model, cost);

  model.step_micro = [box, h](const AgentState& x, const ControlInput& u) {
    const Eigen::Index m = x.rows();
    const Point mean = empirical(x).mean();
    const double factor =
        m > 1 ? h * static_cast<double>(m) / static_cast<double>(m - 1) : 0.0;
    AgentState next(m, x.cols());
    for (Eigen::Index i = 0; i < m; ++i) {
      const Point xi = x.row(i).transpose();
      next.row(i) = box.clamp(xi + factor * (mean - xi) + u).transpose();
    }
    return next;
  };
  model.step_meanfield = [box, h](const AtomicMeasure& mu,
                                  const ControlInput& u) {
    const Point mean = mu.mean();
    Eigen::MatrixXd atoms(mu.size(), mu.dim());
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
      const Point y = mu.atom(i);
      atoms.row(i) = box.clamp(y + h * (mean - y) + u).transpose();
    }
    return AtomicMeasure(std::move(atoms), mu.weights());
  };
  return model;
}

namespace detail {

// Smooth influence cutoff at the given radius: close to 1 well inside,
// close to 0 well outside, logistic transition of width radius/10.
inline double confidence_cutoff(double distance, double radius) {
  return 1.0 / (1.0 + std::exp(10.0 * (distance - radius) / radius));
}

// Attraction drift integrated against a measure in canonical atom order.
inline Point confidence_drift(const Point& y, const AtomicMeasure& sorted_mu,
                              double radius) {
  Point acc = Point::Zero(y.size());
  for (Eigen::Index j = 0; j < sorted_mu.size(); ++j) {
    const Point diff = sorted_mu.atom(j) - y;
    acc += sorted_mu.weights()[j] * confidence_cutoff(diff.norm(), radius) * diff;
  }
  return acc;
}

}  // namespace detail

/// Smoothed Hegselmann-Krause opinion dynamics:
///   x_i+ = clamp(x_i + (h/M) sum_j phi_r(|x_j - x_i|) (x_j - x_i) + u),
/// with phi_r a smooth cutoff at radius r. The 1/M average includes the
/// (vanishing) self term, so the microscopic map is exactly the measure-level
/// map restricted to uniform empirical measures.
inline SystemModel bounded_confidence(const StateBox& box, double h,
                                      double radius, double u_max,
                                      const StageCost& cost) {
  if (!(h > 0.0 && h <= 1.0))
    throw std::invalid_argument("bounded_confidence: step size must lie in (0, 1]");
  if (!(radius > 0.0))
    throw std::invalid_argument("bounded_confidence: radius must be positive");
  if (!(u_max > 0.0))
    throw std::invalid_argument("bounded_confidence: u_max must be positive");
  SystemModel model("bounded_confidence", box);
  model.control_dim = box.dim();
  model.u_max = u_max;
  model.step_size = h;
  // Sampled bound (~2.25) with 1.5x margin for the reference Gaussian kernel.
  model.lip_dynamics = 3.4;
  model.exact_restriction = true;
  detail::attach_cost(model, cost);

  const auto push = [box, h, radius](const AtomicMeasure& mu,
                                     const ControlInput& u) {
    const AtomicMeasure sorted = mu.sorted();
    Eigen::MatrixXd atoms(mu.size(), mu.dim());
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
      const Point y = mu.atom(i);
      atoms.row(i) =
          box.clamp(y + h * detail::confidence_drift(y, sorted, radius) + u)
              .transpose();
    }
    return AtomicMeasure(std::move(atoms), mu.weights());
  };
  model.step_meanfield = push;
  model.step_micro = [push](const AgentState& x, const ControlInput& u) {
    return push(empirical(x), u).atoms();
  };
  return model;
}

namespace detail {

// Velocity alignment drift with communication weight (1 + |dq|^2)^(-beta),
// integrated against a measure on (position, velocity) pairs.
inline Point alignment_drift(const Point& y, const AtomicMeasure& sorted_mu,
                             double beta) {
  const Eigen::Index q_dim = y.size() / 2;
  Point acc = Point::Zero(q_dim);
  for (Eigen::Index j = 0; j < sorted_mu.size(); ++j) {
    const Point other = sorted_mu.atom(j);
    const double dq2 = (other.head(q_dim) - y.head(q_dim)).squaredNorm();
    const double w = std::pow(1.0 + dq2, -beta);
    acc += sorted_mu.weights()[j] * w * (other.tail(q_dim) - y.tail(q_dim));
  }
  return acc;
}

}  // namespace detail

/// Discrete-time Cucker-Smale flocking. Each agent state is a stacked
/// (position, velocity) pair, the box covers both halves, and the shared
/// control acts on the velocity:
///   q_i+ = clamp(q_i + h v_i)
///   v_i+ = clamp(v_i + (h/M) sum_j (1 + |q_j - q_i|^2)^(-beta) (v_j - v_i) + u).
inline SystemModel cucker_smale_discrete(const StateBox& box, double h,
                                         double beta, double u_max,
                                         const StageCost& cost) {
  if (box.dim() % 2 != 0)
    throw std::invalid_argument(
        "cucker_smale_discrete: box dimension must be even (positions then velocities)");
  if (!(h > 0.0 && h <= 1.0))
    throw std::invalid_argument("cucker_smale_discrete: step size must lie in (0, 1]");
  if (beta < 0.0)
    throw std::invalid_argument("cucker_smale_discrete: beta must be nonnegative");
  if (!(u_max > 0.0))
    throw std::invalid_argument("cucker_smale_discrete: u_max must be positive");
  SystemModel model("cucker_smale_discrete", box);
  const Eigen::Index q_dim = box.dim() / 2;
  model.control_dim = q_dim;
  model.u_max = u_max;
  model.step_size = h;
  // Sampled bound (~2.1) with 1.5x margin for the reference Gaussian kernel.
  model.lip_dynamics = 3.2;
  model.exact_restriction = true;
  detail::attach_cost(model, cost);

  const auto push = [box, h, beta, q_dim](const AtomicMeasure& mu,
                                          const ControlInput& u) {
    const AtomicMeasure sorted = mu.sorted();
    Eigen::MatrixXd atoms(mu.size(), mu.dim());
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
      const Point y = mu.atom(i);
      Point next(y.size());
      next.head(q_dim) = y.head(q_dim) + h * y.tail(q_dim);
      next.tail(q_dim) =
          y.tail(q_dim) + h * detail::alignment_drift(y, sorted, beta) + u;
      atoms.row(i) = box.clamp(next).transpose();
    }
    return AtomicMeasure(std::move(atoms), mu.weights());
  };
  model.step_meanfield = push;
  model.step_micro = [push](const AgentState& x, const ControlInput& u) {
    return push(empirical(x), u).atoms();
  };
  return model;
}

/// Human-readable listing of the model zoo with parameters and the declared
/// constants of a reference instantiation. Ordering is fixed.
inline std::string describe_models() {
  std::ostringstream os;
  const StateBox unit1 = StateBox::unit(1);
  const StateBox unit2 = StateBox::unit(2);
  const StageCost vc1 = variance_cost(unit1, 1, 0.1, 0.1);
  const StageCost vc2 = variance_cost(unit2, 1, 0.1, 0.1);
  const auto lc = linear_consensus(unit1, 0.5, 0.1, vc1);
  const auto bc = bounded_confidence(unit1, 0.5, 0.3, 0.1, vc1);
  const auto cs = cucker_smale_discrete(unit2, 0.5, 0.5, 0.1, vc2);
  const auto describe = [&os](const SystemModel& m, const char* params,
                              const char* note) {
    os << m.name << "\n"
       << "  parameters: " << params << "\n"
       << "  " << note << "\n"
       << "  declared constants (reference instantiation): L_f=" << m.lip_dynamics
       << " L_cost=" << m.lip_stage_cost << " B_cost=" << m.stage_cost_bound
       << "\n"
       << "  exact restriction of the measure-level map: "
       << (m.exact_restriction ? "yes" : "no") << "\n";
  };
  describe(lc, "h in (0,1], u_max > 0",
           "drift toward the mean with self-exclusion scaling M/(M-1); "
           "one-step gap of order 1/M");
  describe(bc, "h in (0,1], radius > 0, u_max > 0",
           "smoothed Hegselmann-Krause attraction with cutoff radius");
  describe(cs, "h in (0,1], beta >= 0, u_max > 0",
           "position-velocity flocking with polynomial communication decay");
  os << "stage costs: variance(lambda_u), kernel_cohesion(lambda_u)\n";
  return os.str();
}

}  // namespace mfl
