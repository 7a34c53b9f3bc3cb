#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mfl/convergence.hpp"
#include "mfl/models.hpp"
#include "mfl/sampling.hpp"

using namespace mfl;

namespace {

const StateBox kBox = StateBox::unit(1);
const Kernel kGauss = Kernel::gaussian(kBox, 0.5);

SystemModel consensus(double h = 0.5) {
  return linear_consensus(kBox, h, 0.1, variance_cost(kBox, 1, 0.1, 0.1));
}

SystemModel confidence() {
  return bounded_confidence(kBox, 0.5, 0.3, 0.1,
                            variance_cost(kBox, 1, 0.1, 0.1));
}

Point p1(double x) {
  Point p(1);
  p[0] = x;
  return p;
}

AtomicMeasure two_atoms(double a, double b) {
  Eigen::MatrixXd atoms(2, 1);
  atoms << a, b;
  return AtomicMeasure::uniform(std::move(atoms));
}

ControlInput u0() { return ControlInput::Zero(1); }

// Brute-force mmd oracle (scalar Gaussian formula, given atom order).
double mmd_oracle(const AtomicMeasure& mu, const AtomicMeasure& nu,
                  double sigma) {
  const auto inner = [sigma](const AtomicMeasure& a, const AtomicMeasure& b) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i)
      for (Eigen::Index j = 0; j < b.size(); ++j)
        acc += a.weights()[i] * b.weights()[j] *
               std::exp(-(a.atom(i) - b.atom(j)).squaredNorm() /
                        (2.0 * sigma * sigma));
    return acc;
  };
  return std::sqrt(std::max(
      inner(mu, mu) - 2.0 * inner(mu, nu) + inner(nu, nu), 0.0));
}

}  // namespace

TEST_CASE("mf_step: fixed point, hand update, preserved weights") {
  const SystemModel model = consensus();
  const AtomicMeasure dirac = AtomicMeasure::dirac(p1(0.3));
  CHECK(measure_equal(mf_step(model, dirac, u0()), dirac, 1e-15));

  // atoms move halfway to the mean 0.5: {0.4, 0.6} -> {0.45, 0.55}
  const AtomicMeasure next = mf_step(model, two_atoms(0.4, 0.6), u0());
  CHECK(next.atoms()(0, 0) == Catch::Approx(0.45).margin(1e-15));
  CHECK(next.atoms()(1, 0) == Catch::Approx(0.55).margin(1e-15));

  Eigen::MatrixXd atoms(3, 1);
  atoms << 0.2, 0.5, 0.9;
  Eigen::VectorXd w(3);
  w << 0.2, 0.3, 0.5;
  const AtomicMeasure weighted(atoms, w);
  CHECK(mf_step(model, weighted, u0()).weights() == w);
}

TEST_CASE("mf_trajectory iterates the measure map") {
  const SystemModel model = consensus();
  const AtomicMeasure start = two_atoms(0.4, 0.6);

  const auto one = mf_trajectory(model, start, ControlSequence::zeros(1, 1));
  REQUIRE(one.size() == 2);
  CHECK(measure_equal(one[1], mf_step(model, start, u0()), 0.0));

  const AtomicMeasure dirac = AtomicMeasure::dirac(p1(0.7));
  const auto constant =
      mf_trajectory(model, dirac, ControlSequence::zeros(4, 1));
  for (const auto& mu : constant) CHECK(measure_equal(mu, dirac, 1e-15));

  const auto two = mf_trajectory(model, start, ControlSequence::zeros(2, 1));
  CHECK(two[2].atoms()(0, 0) == Catch::Approx(0.475).margin(1e-15));
  CHECK(two[2].atoms()(1, 0) == Catch::Approx(0.525).margin(1e-15));
}

TEST_CASE("mf_stage_cost evaluates the measure-level cost") {
  const SystemModel model = consensus();
  CHECK(mf_stage_cost(model, AtomicMeasure::dirac(p1(0.2)), u0()) == 0.0);
  CHECK(mf_stage_cost(model, two_atoms(0.4, 0.6), u0()) ==
        Catch::Approx(0.01).margin(1e-15));

  const SystemModel cohesion = linear_consensus(
      kBox, 0.5, 0.1, kernel_cohesion_cost(kGauss, 1, 0.1, 0.1));
  ControlInput u(1);
  u << 0.05;
  const Point x = p1(0.3);
  CHECK(mf_stage_cost(cohesion, AtomicMeasure::dirac(x), u) ==
        Catch::Approx(-kernel_eval(kGauss, x, x) + 0.1 * 0.05 * 0.05)
            .margin(1e-15));
}

TEST_CASE("mf_total_cost sums measure-level stage costs") {
  const SystemModel model = consensus();
  const AtomicMeasure start = two_atoms(0.4, 0.6);
  CHECK(mf_total_cost(model, start, ControlSequence::zeros(1, 1)) ==
        Catch::Approx(0.01).margin(1e-15));
  CHECK(mf_total_cost(model, AtomicMeasure::dirac(p1(0.5)),
                      ControlSequence::zeros(3, 1)) == 0.0);
  // Two hand steps: Var({0.4,0.6}) + Var({0.45,0.55}) = 0.01 + 0.0025.
  CHECK(mf_total_cost(model, start, ControlSequence::zeros(2, 1)) ==
        Catch::Approx(0.0125).margin(1e-14));
}

TEST_CASE("exact-restriction models have bit-exact zero one-step discrepancy") {
  const SystemModel bc = confidence();
  for (Eigen::Index m : {10, 100}) {
    const SampleStats stats = one_step_discrepancy(bc, kGauss, m, 50, 1234);
    CHECK(stats.max == 0.0);
  }
  const StateBox box2 = StateBox::unit(2);
  const SystemModel cs = cucker_smale_discrete(
      box2, 0.5, 0.6, 0.1, variance_cost(box2, 1, 0.1, 0.1));
  const Kernel k2 = Kernel::gaussian(box2, 0.5);
  CHECK(one_step_discrepancy(cs, k2, 20, 50, 99).max == 0.0);
}

TEST_CASE("consensus one-step discrepancy matches the hand M=2 instance") {
  const SystemModel model = consensus();
  AgentState x(2, 1);
  x << 0.4, 0.6;
  // Micro: effective factor h M/(M-1) = 1, both agents land on the mean.
  const AtomicMeasure micro_image = empirical(step(model, x, u0()));
  CHECK(micro_image.atoms()(0, 0) == Catch::Approx(0.5).margin(1e-15));
  // Measure level: plain h = 0.5 contraction.
  const AtomicMeasure mf_image = mf_step(model, empirical(x), u0());
  const double expected =
      mmd_oracle(two_atoms(0.5, 0.5), two_atoms(0.45, 0.55), 0.5);
  CHECK(mmd(kGauss, micro_image, mf_image) ==
        Catch::Approx(expected).margin(1e-13));
}

TEST_CASE("consensus discrepancy halves when the population doubles") {
  const SystemModel model = consensus();
  const double at_25 = one_step_discrepancy(model, kGauss, 25, 100, 7).max;
  const double at_50 = one_step_discrepancy(model, kGauss, 50, 100, 7).max;
  const double at_100 = one_step_discrepancy(model, kGauss, 100, 100, 7).max;
  CHECK(at_50 <= 0.75 * at_25);
  CHECK(at_100 <= 0.75 * at_50);
  CHECK(at_50 / at_100 == Catch::Approx(2.0).epsilon(0.35));
}

TEST_CASE("trajectory bound: zero for exact models, identity at N=1") {
  const SystemModel bc = confidence();
  Rng rng(11);
  const AgentState x0 = sample_agent_state(rng, kBox, 12, false);
  const ControlSequence useq = sample_control_sequence(rng, 1, 0.1, 4);
  const TrajectoryBoundCheck zero = trajectory_bound_check(bc, kGauss, x0, useq);
  CHECK(zero.lhs == 0.0);
  CHECK(zero.rhs == 0.0);

  const SystemModel lc = consensus();
  const ControlSequence one_step_seq = sample_control_sequence(rng, 1, 0.1, 1);
  const TrajectoryBoundCheck single =
      trajectory_bound_check(lc, kGauss, x0, one_step_seq);
  CHECK(single.lhs == single.rhs);  // one-term bound is the identity
  CHECK(single.lhs > 0.0);
}

TEST_CASE("trajectory bound holds on random consensus instances") {
  const SystemModel lc = consensus();
  for (int instance = 0; instance < 50; ++instance) {
    Rng rng = sample_stream(321, StreamTag::trajectory_bound, 10,
                            static_cast<std::uint64_t>(instance));
    const AgentState x0 =
        sample_agent_state(rng, kBox, 10, clustered_sample(instance));
    const ControlSequence useq = sample_control_sequence(rng, 1, 0.1, 5);
    const TrajectoryBoundCheck check =
        trajectory_bound_check(lc, kGauss, x0, useq);
    CHECK(check.holds());
    CHECK(check.residuals.size() == 5);
  }
}

TEST_CASE("cost convergence: exact model zeros, consensus decays") {
  const std::vector<Eigen::Index> ms = {10, 40, 160};
  const ConvergenceReport exact =
      cost_convergence(confidence(), kGauss, ms, 3, 40, 5);
  for (const auto& e : exact.entries) CHECK(e.stats.max == 0.0);
  CHECK_FALSE(exact.fit.valid);  // nothing to fit on exact zeros

  const ConvergenceReport lc =
      cost_convergence(consensus(), kGauss, ms, 3, 40, 5);
  CHECK(lc.entries[1].stats.median <= lc.entries[0].stats.median);
  CHECK(lc.entries[2].stats.median <= lc.entries[1].stats.median);

  CHECK_THROWS_AS(cost_convergence(consensus(), kGauss, ms, 0, 40, 5),
                  std::invalid_argument);
  CHECK_THROWS_AS(cost_convergence(consensus(), kGauss, {40, 10}, 3, 40, 5),
                  std::invalid_argument);
}

TEST_CASE("horizon-1 cost gaps coincide with stage cost gaps") {
  // With the variance cost both levels agree exactly on empirical measures,
  // so at N=1 the cost report reduces to the (zero) stage-cost report.
  const std::vector<Eigen::Index> ms = {10, 40};
  const ConvergenceReport cost1 =
      cost_convergence(consensus(), kGauss, ms, 1, 40, 5);
  const ConvergenceReport stage =
      stage_cost_convergence(consensus(), kGauss, ms, 40, 5);
  for (std::size_t i = 0; i < ms.size(); ++i) {
    CHECK(cost1.entries[i].stats.max == 0.0);
    CHECK(stage.entries[i].stats.max == 0.0);
  }
}

TEST_CASE("a deliberate 1/M stage-cost correction decays at rate -1") {
  SystemModel bessel = consensus();
  // Micro cost with the sample-variance normalization M/(M-1); the gap to
  // the measure-level variance is Var/(M-1).
  bessel.stage_cost_micro = [](const AgentState& x, const ControlInput& u) {
    const double m = static_cast<double>(x.rows());
    return empirical(x).variance() * m / (m - 1.0) + 0.1 * u.squaredNorm();
  };
  const ConvergenceReport report = stage_cost_convergence(
      bessel, kGauss, {25, 50, 100, 200, 400}, 100, 17);
  REQUIRE(report.fit.valid);
  CHECK(report.fit.slope == Catch::Approx(-1.0).margin(0.12));
}

TEST_CASE("embedding convergence: dirac reference and determinism") {
  const AtomicMeasure dirac = AtomicMeasure::dirac(p1(0.5));
  const ConvergenceReport r =
      embedding_convergence(kGauss, dirac, {4, 16}, 3, 77);
  for (const auto& e : r.entries) CHECK(e.stats.max == 0.0);

  const AtomicMeasure ref = grid_quantization(kBox, 64);
  const ConvergenceReport a =
      embedding_convergence(kGauss, ref, {8, 32, 128}, 5, 123);
  const ConvergenceReport b =
      embedding_convergence(kGauss, ref, {8, 32, 128}, 5, 123);
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    CHECK(a.entries[i].stats.median == b.entries[i].stats.median);
    CHECK(a.entries[i].stats.max == b.entries[i].stats.max);
  }
  CHECK(a.fit.slope == b.fit.slope);
}

TEST_CASE("parallel execution does not change any report") {
  const SystemModel lc = consensus();
  const SampleStats serial = one_step_discrepancy(lc, kGauss, 30, 60, 2024, 1);
  const SampleStats parallel =
      one_step_discrepancy(lc, kGauss, 30, 60, 2024, 8);
  CHECK(serial.max == parallel.max);
  CHECK(serial.mean == parallel.mean);
  CHECK(serial.median == parallel.median);

  const ConvergenceReport c1 =
      cost_convergence(lc, kGauss, {10, 40}, 3, 40, 9, 1);
  const ConvergenceReport c8 =
      cost_convergence(lc, kGauss, {10, 40}, 3, 40, 9, 8);
  for (std::size_t i = 0; i < c1.entries.size(); ++i)
    CHECK(c1.entries[i].stats.max == c8.entries[i].stats.max);
}

TEST_CASE("lipschitz estimation: constant map, identity map, declared bounds") {
  SystemModel constant = consensus();
  AgentState fixed(3, 1);
  fixed << 0.5, 0.5, 0.5;
  constant.step_micro = [fixed](const AgentState&, const ControlInput&) {
    return fixed;
  };
  CHECK(estimate_lipschitz(constant, kGauss, LipschitzTarget::dynamics, 3, 40,
                           5) == 0.0);

  // Identity map (up to clamping and the shared shift): u-free pairs
  // realize ratio 1 exactly because the Gaussian metric is shift invariant,
  // so the sampled maximum is at least 1.
  SystemModel identity = consensus();
  identity.step_micro = [](const AgentState& x, const ControlInput& u) {
    AgentState next = x;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      next.row(i) = kBox.clamp(x.row(i).transpose() + u).transpose();
    return next;
  };
  const double ratio =
      estimate_lipschitz(identity, kGauss, LipschitzTarget::dynamics, 5, 80, 5);
  CHECK(ratio >= 1.0 - 1e-9);
  Rng rng(5);
  const AgentState a = sample_agent_state(rng, kBox, 5, false);
  const AgentState b = sample_agent_state(rng, kBox, 5, false);
  CHECK(mmd(kGauss, empirical(step(identity, a, u0())),
            empirical(step(identity, b, u0()))) ==
        mmd(kGauss, empirical(a), empirical(b)));

  // Zoo estimates stay below the declared constants.
  CHECK(estimate_lipschitz(consensus(), kGauss, LipschitzTarget::dynamics, 20,
                           400, 5) <= consensus().lip_dynamics);
  CHECK(estimate_lipschitz(consensus(), kGauss, LipschitzTarget::stage_cost, 20,
                           400, 5) <= consensus().lip_stage_cost);
  CHECK(estimate_lipschitz(confidence(), kGauss, LipschitzTarget::dynamics, 20,
                           400, 5) <= confidence().lip_dynamics);
}

TEST_CASE("weighted measures drive the interaction drift as hand computed") {
  const SystemModel bc = confidence();
  Eigen::MatrixXd atoms(2, 1);
  atoms << 0.45, 0.55;
  Eigen::VectorXd w(2);
  w << 0.25, 0.75;
  const AtomicMeasure mu(atoms, w);
  const AtomicMeasure next = mf_step(bc, mu, u0());
  // Hand drift for atom y against the weighted measure:
  //   h * sum_j w_j phi_r(|x_j - y|) (x_j - y), phi logistic at radius 0.3.
  const auto cutoff = [](double s) {
    return 1.0 / (1.0 + std::exp(10.0 * (s - 0.3) / 0.3));
  };
  const double drift0 =
      0.5 * (0.25 * cutoff(0.0) * 0.0 + 0.75 * cutoff(0.1) * 0.1);
  const double drift1 =
      0.5 * (0.25 * cutoff(0.1) * (-0.1) + 0.75 * cutoff(0.0) * 0.0);
  CHECK(next.atoms()(0, 0) == Catch::Approx(0.45 + drift0).margin(1e-14));
  CHECK(next.atoms()(1, 0) == Catch::Approx(0.55 + drift1).margin(1e-14));
  CHECK(next.weights() == w);

  // Same exercise for the flocking model: weighted velocity alignment.
  const StateBox box2 = StateBox::unit(2);
  const SystemModel cs = cucker_smale_discrete(
      box2, 0.5, 0.6, 0.1, variance_cost(box2, 1, 0.1, 0.1));
  Eigen::MatrixXd qv(2, 2);
  qv << 0.2, 0.5, 0.4, 0.3;  // (q, v) rows
  const AtomicMeasure pair(qv, w);
  const AtomicMeasure moved = mf_step(cs, pair, u0());
  const double comm = std::pow(1.0 + 0.2 * 0.2, -0.6);
  const double v_drift0 = 0.5 * 0.75 * comm * (0.3 - 0.5);
  CHECK(moved.atoms()(0, 0) == Catch::Approx(0.2 + 0.5 * 0.5).margin(1e-14));
  CHECK(moved.atoms()(0, 1) == Catch::Approx(0.5 + v_drift0).margin(1e-14));
}

TEST_CASE("stepping clamps every state into the box") {
  const StateBox box2 = StateBox::unit(2);
  const std::vector<SystemModel> models = {
      consensus(), confidence(),
      cucker_smale_discrete(box2, 0.5, 0.6, 0.1,
                            variance_cost(box2, 1, 0.1, 0.1))};
  Rng rng(606);
  for (const SystemModel& model : models) {
    for (int trial = 0; trial < 200; ++trial) {
      // States hugging the boundary with extreme shared controls.
      AgentState x(6, model.box.dim());
      for (Eigen::Index i = 0; i < 6; ++i)
        for (Eigen::Index c = 0; c < model.box.dim(); ++c)
          x(i, c) = rng.uniform() < 0.5 ? rng.uniform(0.0, 0.05)
                                        : rng.uniform(0.95, 1.0);
      ControlInput u =
          ControlInput::Constant(model.control_dim,
                                 trial % 2 == 0 ? model.u_max : -model.u_max);
      CHECK(model.box.contains_rows(step(model, x, u)));
      const AtomicMeasure pushed = mf_step(model, empirical(x), u);
      CHECK(model.box.contains_rows(pushed.atoms()));
    }
  }
}

TEST_CASE("sampled lipschitz estimates stay below declared for the full zoo") {
  const StateBox box2 = StateBox::unit(2);
  const Kernel k2 = Kernel::gaussian(box2, 0.5);
  const SystemModel cs = cucker_smale_discrete(
      box2, 0.5, 0.6, 0.1, variance_cost(box2, 1, 0.1, 0.1));
  CHECK(estimate_lipschitz(cs, k2, LipschitzTarget::dynamics, 20, 300, 5) <=
        cs.lip_dynamics);
  CHECK(estimate_lipschitz(cs, k2, LipschitzTarget::stage_cost, 20, 300, 5) <=
        cs.lip_stage_cost);

  const SystemModel cohesion = linear_consensus(
      kBox, 0.5, 0.1, kernel_cohesion_cost(kGauss, 1, 0.1, 0.1));
  CHECK(estimate_lipschitz(cohesion, kGauss, LipschitzTarget::stage_cost, 20,
                           300, 5) <= cohesion.lip_stage_cost);
}

TEST_CASE("exceptions from parallel workers reach the caller") {
  CHECK_THROWS_AS(parallel_map<double>(32, 8,
                                       [](std::size_t i) -> double {
                                         if (i == 17)
                                           throw numerical_error("worker 17");
                                         return static_cast<double>(i);
                                       }),
                  numerical_error);

  // A model throwing mid-experiment surfaces as the same exception at any
  // worker count.
  SystemModel negative_cost = consensus();
  negative_cost.stage_cost_micro = [](const AgentState&, const ControlInput&) {
    return -1.0;
  };
  const ConvergenceReport ok =
      stage_cost_convergence(negative_cost, kGauss, {8}, 16, 3, 8);
  CHECK(ok.entries[0].stats.max > 0.0);  // gap experiments tolerate any sign
}

TEST_CASE("summarize and fit_loglog behave as documented") {
  const SampleStats s = summarize({3.0, 1.0, 2.0, 4.0});
  CHECK(s.max == 4.0);
  CHECK(s.mean == 2.5);
  CHECK(s.median == 2.5);

  // Exact power law 5 M^-1 recovers slope -1.
  const RateFit fit =
      fit_loglog({{10.0, 0.5}, {100.0, 0.05}, {1000.0, 0.005}});
  REQUIRE(fit.valid);
  CHECK(fit.slope == Catch::Approx(-1.0).margin(1e-12));
  CHECK(fit.residual == Catch::Approx(0.0).margin(1e-12));

  CHECK_FALSE(fit_loglog({{10.0, 0.0}, {100.0, 0.0}}).valid);
}
