#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mfl/measure.hpp"
#include "mfl/sampling.hpp"

using namespace mfl;

namespace {

Point p1(double x) {
  Point p(1);
  p[0] = x;
  return p;
}

AtomicMeasure make_measure(std::initializer_list<double> atoms,
                           std::initializer_list<double> weights) {
  Eigen::MatrixXd a(static_cast<Eigen::Index>(atoms.size()), 1);
  Eigen::VectorXd w(static_cast<Eigen::Index>(weights.size()));
  Eigen::Index i = 0;
  for (double v : atoms) a(i++, 0) = v;
  i = 0;
  for (double v : weights) w[i++] = v;
  return AtomicMeasure(std::move(a), std::move(w));
}

// Brute-force double-sum oracle, independent of the library evaluation path:
// scalar Gaussian formula, atoms in their given order.
double kme_inner_oracle(const AtomicMeasure& mu, const AtomicMeasure& nu,
                        double sigma) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < mu.size(); ++i)
    for (Eigen::Index j = 0; j < nu.size(); ++j) {
      const double d2 = (mu.atom(i) - nu.atom(j)).squaredNorm();
      acc += mu.weights()[i] * nu.weights()[j] *
             std::exp(-d2 / (2.0 * sigma * sigma));
    }
  return acc;
}

double mmd_oracle(const AtomicMeasure& mu, const AtomicMeasure& nu,
                  double sigma) {
  const double r = kme_inner_oracle(mu, mu, sigma) -
                   2.0 * kme_inner_oracle(mu, nu, sigma) +
                   kme_inner_oracle(nu, nu, sigma);
  return std::sqrt(std::max(r, 0.0));
}

const StateBox kBox = StateBox::cube(1, -2.0, 2.0);
const Kernel kGauss = Kernel::gaussian(kBox, 1.0);

}  // namespace

TEST_CASE("empirical places weight 1/M on every component") {
  AgentState x(2, 1);
  x << 0.2, 0.8;
  const AtomicMeasure mu = empirical(x);
  CHECK(mu.size() == 2);
  CHECK(mu.weights()[0] == 0.5);
  CHECK(mu.weights()[1] == 0.5);
  CHECK(mu.atoms()(0, 0) == 0.2);

  AgentState coincident(2, 1);
  coincident << 0.5, 0.5;
  const AtomicMeasure nu = empirical(coincident);
  CHECK(nu.size() == 2);  // repeated atoms stay separate
  CHECK(nu.weights()[0] == 0.5);

  AgentState permuted(2, 1);
  permuted << 0.8, 0.2;
  CHECK(measure_equal(empirical(x), empirical(permuted), 1e-15));

  CHECK_THROWS_AS(empirical(AgentState(0, 1)), std::invalid_argument);
}

TEST_CASE("measure construction validates its invariants") {
  Eigen::MatrixXd atoms(2, 1);
  atoms << 0.1, 0.9;
  Eigen::VectorXd bad_sum(2);
  bad_sum << 0.5, 0.6;
  CHECK_THROWS_AS(AtomicMeasure(atoms, bad_sum), std::invalid_argument);
  Eigen::VectorXd negative(2);
  negative << 1.2, -0.2;
  CHECK_THROWS_AS(AtomicMeasure(atoms, negative), std::invalid_argument);
}

TEST_CASE("kme_inner matches the weighted Gram double sum") {
  const AtomicMeasure dx = AtomicMeasure::dirac(p1(0.3));
  CHECK(kme_inner(kGauss, dx, dx) == 1.0);  // k(x, x)

  const AtomicMeasure d0 = AtomicMeasure::dirac(p1(0.0));
  const AtomicMeasure d1 = AtomicMeasure::dirac(p1(1.0));
  // oracle value: exp(-1/2)
  CHECK(kme_inner(kGauss, d0, d1) ==
        Catch::Approx(0.6065306597126334).epsilon(1e-15));

  Rng rng(5150);
  for (int trial = 0; trial < 50; ++trial) {
    const AtomicMeasure mu = sample_atomic_measure(rng, kBox, 6);
    const AtomicMeasure nu = sample_atomic_measure(rng, kBox, 6);
    CHECK(kme_inner(kGauss, mu, nu) ==
          Catch::Approx(kme_inner_oracle(mu, nu, 1.0)).margin(1e-13));
  }
}

TEST_CASE("kme_inner is bilinear in mixtures") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const AtomicMeasure mu1 = sample_atomic_measure(rng, kBox, 5);
    const AtomicMeasure mu2 = sample_atomic_measure(rng, kBox, 5);
    const AtomicMeasure nu = sample_atomic_measure(rng, kBox, 5);
    const double lambda = rng.uniform();
    const double mixed = kme_inner(kGauss, mixture(lambda, mu1, mu2), nu);
    const double split = lambda * kme_inner(kGauss, mu1, nu) +
                         (1.0 - lambda) * kme_inner(kGauss, mu2, nu);
    CHECK(mixed == Catch::Approx(split).margin(1e-13));
  }
}

TEST_CASE("kme_eval is the weighted kernel sum") {
  const AtomicMeasure dx = AtomicMeasure::dirac(p1(0.7));
  CHECK(kme_eval(kGauss, dx, p1(0.2)) ==
        kernel_eval(kGauss, p1(0.2), p1(0.7)));

  const AtomicMeasure uniform01 = make_measure({0.0, 1.0}, {0.5, 0.5});
  // oracle value: (1 + exp(-1/2)) / 2 = 0.8032653298563167
  CHECK(kme_eval(kGauss, uniform01, p1(0.0)) ==
        Catch::Approx(0.8032653298563167).epsilon(1e-15));

  const AtomicMeasure weighted = make_measure({0.0, 1.0}, {0.3, 0.7});
  const Point z = p1(0.4);
  const double expected = 0.3 * kernel_eval(kGauss, z, p1(0.0)) +
                          0.7 * kernel_eval(kGauss, z, p1(1.0));
  CHECK(kme_eval(kGauss, weighted, z) == Catch::Approx(expected).margin(1e-15));
}

TEST_CASE("embedding evaluation is linear on mixtures") {
  Rng rng(47);
  for (int trial = 0; trial < 100; ++trial) {
    const AtomicMeasure mu = sample_atomic_measure(rng, kBox, 6);
    const AtomicMeasure nu = sample_atomic_measure(rng, kBox, 6);
    const double lambda = rng.uniform();
    const Point z = sample_point(rng, kBox);
    const double mixed = kme_eval(kGauss, mixture(lambda, mu, nu), z);
    const double split = lambda * kme_eval(kGauss, mu, z) +
                         (1.0 - lambda) * kme_eval(kGauss, nu, z);
    CHECK(mixed == Catch::Approx(split).margin(1e-12));
  }
}

TEST_CASE("integrate_rkhs satisfies the reproducing identity") {
  // f = k(., z) integrated against a dirac reproduces the kernel value.
  RkhsCombination f;
  f.centers = Eigen::MatrixXd(1, 1);
  f.centers << 0.6;
  f.coefficients = Eigen::VectorXd::Ones(1);
  CHECK(integrate_rkhs(kGauss, f, AtomicMeasure::dirac(p1(0.1))) ==
        kernel_eval(kGauss, p1(0.6), p1(0.1)));

  // Antisymmetric combination against the symmetric uniform measure:
  // (k(0,0) + k(1,0))/2 - (k(0,1) + k(1,1))/2 = 0.
  RkhsCombination g;
  g.centers = Eigen::MatrixXd(2, 1);
  g.centers << 0.0, 1.0;
  g.coefficients = Eigen::VectorXd(2);
  g.coefficients << 1.0, -1.0;
  const AtomicMeasure uniform01 = make_measure({0.0, 1.0}, {0.5, 0.5});
  CHECK(integrate_rkhs(kGauss, g, uniform01) ==
        Catch::Approx(0.0).margin(1e-15));

  // Random instances: both evaluation orders of the double sum agree.
  Rng rng(8080);
  for (int trial = 0; trial < 100; ++trial) {
    const AtomicMeasure mu = sample_atomic_measure(rng, kBox, 6);
    const Eigen::Index n_centers =
        1 + static_cast<Eigen::Index>(rng.uniform_index(5));
    RkhsCombination h;
    h.centers = Eigen::MatrixXd(n_centers, 1);
    h.coefficients = Eigen::VectorXd(n_centers);
    for (Eigen::Index c = 0; c < n_centers; ++c) {
      h.centers.row(c) = sample_point(rng, kBox).transpose();
      h.coefficients[c] = rng.uniform(-2.0, 2.0);
    }
    double swapped = 0.0;  // sum over centers first, then atoms
    for (Eigen::Index c = 0; c < n_centers; ++c)
      for (Eigen::Index i = 0; i < mu.size(); ++i)
        swapped += h.coefficients[c] * mu.weights()[i] *
                   kernel_eval(kGauss, h.centers.row(c).transpose(), mu.atom(i));
    CHECK(integrate_rkhs(kGauss, h, mu) ==
          Catch::Approx(swapped).margin(1e-10));
  }
}

TEST_CASE("mmd matches definitions and the brute-force oracle") {
  const AtomicMeasure mu = make_measure({0.2, 0.9}, {0.5, 0.5});
  CHECK(mmd(kGauss, mu, mu) == 0.0);

  // mmd between diracs is the kernel metric.
  CHECK(mmd(kGauss, AtomicMeasure::dirac(p1(0.0)),
            AtomicMeasure::dirac(p1(1.0))) ==
        Catch::Approx(kernel_metric(kGauss, p1(0.0), p1(1.0))).epsilon(1e-15));

  const AtomicMeasure uniform01 = make_measure({0.0, 1.0}, {0.5, 0.5});
  const AtomicMeasure half = AtomicMeasure::dirac(p1(0.5));
  CHECK(mmd(kGauss, uniform01, half) ==
        Catch::Approx(mmd_oracle(uniform01, half, 1.0)).margin(1e-13));
}

TEST_CASE("mmd is a symmetric distance on random triples") {
  Rng rng(777);
  for (int trial = 0; trial < 100; ++trial) {
    const AtomicMeasure a = sample_atomic_measure(rng, kBox, 8);
    const AtomicMeasure b = sample_atomic_measure(rng, kBox, 8);
    const AtomicMeasure c = sample_atomic_measure(rng, kBox, 8);
    CHECK(mmd(kGauss, a, b) == Catch::Approx(mmd(kGauss, b, a)).margin(1e-12));
    CHECK(mmd(kGauss, a, c) <=
          mmd(kGauss, a, b) + mmd(kGauss, b, c) + 1e-12);
  }
}

TEST_CASE("mmd separates well-separated measures and only those") {
  const AtomicMeasure a = make_measure({0.1, 0.9}, {0.5, 0.5});
  const AtomicMeasure b = make_measure({0.9, 0.1}, {0.5, 0.5});
  CHECK(mmd(kGauss, a, b) <= 1e-12);  // equal as distributions
  CHECK(measure_equal(a, b, 1e-12));

  const AtomicMeasure c = make_measure({0.1, 0.7}, {0.5, 0.5});
  CHECK(mmd(kGauss, a, c) > 1e-3);
  CHECK_FALSE(measure_equal(a, c, 1e-9));
}

TEST_CASE("a non positive semidefinite kernel makes the mmd radicand fail") {
  const Kernel bad = Kernel::custom(
      StateBox::unit(1), "distance",
      [](const Point& x, const Point& y) { return 3.0 * (x - y).norm(); },
      3.0);
  const AtomicMeasure a = make_measure({0.1, 0.5}, {0.5, 0.5});
  const AtomicMeasure b = make_measure({0.9}, {1.0});
  CHECK_THROWS_AS(mmd(bad, a, b), numerical_error);
}

TEST_CASE("measure_equal merges coincident atoms and compares weights") {
  const AtomicMeasure split = make_measure({0.4, 0.4, 0.8}, {0.25, 0.25, 0.5});
  const AtomicMeasure merged = make_measure({0.8, 0.4}, {0.5, 0.5});
  CHECK(measure_equal(split, merged, 1e-12));

  const AtomicMeasure skewed = make_measure({0.4, 0.8}, {0.502, 0.498});
  CHECK_FALSE(measure_equal(merged, skewed, 1e-3));
  CHECK(measure_equal(merged, skewed, 5e-3));
}

TEST_CASE("grid quantization covers the box uniformly") {
  const StateBox box = StateBox::unit(1);
  const AtomicMeasure q = grid_quantization(box, 4);
  CHECK(q.size() == 4);
  CHECK(q.atoms()(0, 0) == Catch::Approx(0.125));
  CHECK(q.atoms()(3, 0) == Catch::Approx(0.875));
  CHECK(q.weights()[0] == 0.25);

  const AtomicMeasure q2 = grid_quantization(StateBox::unit(2), 3);
  CHECK(q2.size() == 9);
  CHECK(q2.mean().isApprox(Eigen::Vector2d(0.5, 0.5), 1e-12));
}

TEST_CASE("variance and mean are exactly permutation invariant") {
  Rng rng(1212);
  for (int trial = 0; trial < 50; ++trial) {
    const AtomicMeasure mu = sample_atomic_measure(rng, kBox, 8);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(mu.size()));
    for (std::size_t i = 0; i < perm.size(); ++i)
      perm[i] = static_cast<Eigen::Index>(i);
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    Eigen::MatrixXd atoms(mu.size(), mu.dim());
    Eigen::VectorXd w(mu.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
      atoms.row(static_cast<Eigen::Index>(i)) = mu.atoms().row(perm[i]);
      w[static_cast<Eigen::Index>(i)] = mu.weights()[perm[i]];
    }
    const AtomicMeasure shuffled(std::move(atoms), std::move(w));
    CHECK(shuffled.variance() == mu.variance());
    CHECK(shuffled.mean() == mu.mean());
    CHECK(kme_inner(kGauss, shuffled, shuffled) ==
          kme_inner(kGauss, mu, mu));
  }
}
