// Finitely supported probability measures, kernel mean embeddings and the
// closed-form maximum mean discrepancy between them.
//
// Every measure-level quantity here reduces to weighted Gram sums over the
// atoms. Sums run in canonical (lexicographically sorted) atom order, so all
// results are exactly invariant under re-labelling of the atoms.
#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "mfl/common.hpp"
#include "mfl/kernel.hpp"

namespace mfl {

inline constexpr double kWeightSumTolerance = 1e-12;

// Weighted atoms. Coincident atoms are legal and never merged: empirical
// measures of colliding agents must stay valid as-is.
class AtomicMeasure {
 public:
  AtomicMeasure(Eigen::MatrixXd atoms, Eigen::VectorXd weights)
      : atoms_(std::move(atoms)), weights_(std::move(weights)) {
    if (atoms_.rows() == 0)
      throw std::invalid_argument("AtomicMeasure: needs at least one atom");
    if (weights_.size() != atoms_.rows())
      throw std::invalid_argument(
          "AtomicMeasure: weight count must match atom count");
    if ((weights_.array() < 0.0).any())
      throw std::invalid_argument("AtomicMeasure: weights must be nonnegative");
    if (std::abs(weights_.sum() - 1.0) > kWeightSumTolerance)
      throw std::invalid_argument("AtomicMeasure: weights must sum to one");
  }

  static AtomicMeasure dirac(const Point& x) {
    Eigen::MatrixXd atoms(1, x.size());
    atoms.row(0) = x.transpose();
    return AtomicMeasure(std::move(atoms), Eigen::VectorXd::Ones(1));
  }

  /// Equal weights on the given atoms.
  static AtomicMeasure uniform(Eigen::MatrixXd atoms) {
    const Eigen::Index n = atoms.rows();
    if (n == 0)
      throw std::invalid_argument("AtomicMeasure: needs at least one atom");
    return AtomicMeasure(std::move(atoms),
                         Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
  }

  Eigen::Index size() const { return atoms_.rows(); }
  Eigen::Index dim() const { return atoms_.cols(); }
  const Eigen::MatrixXd& atoms() const { return atoms_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  Point atom(Eigen::Index i) const { return atoms_.row(i).transpose(); }

  /// Weighted mean of the atoms, accumulated in canonical order.
  Point mean() const {
    const auto order = canonical_order(atoms_, weights_);
    Point m = Point::Zero(dim());
    for (Eigen::Index i : order) m += weights_[i] * atoms_.row(i).transpose();
    return m;
  }

  /// Total (summed over coordinates) weighted variance around the mean.
  double variance() const {
    const Point m = mean();
    const auto order = canonical_order(atoms_, weights_);
    double v = 0.0;
    for (Eigen::Index i : order)
      v += weights_[i] * (atoms_.row(i).transpose() - m).squaredNorm();
    return v;
  }

  /// Copy with atoms (and matching weights) in canonical order.
  AtomicMeasure sorted() const {
    const auto order = canonical_order(atoms_, weights_);
    Eigen::MatrixXd a(atoms_.rows(), atoms_.cols());
    Eigen::VectorXd w(weights_.size());
    for (std::size_t r = 0; r < order.size(); ++r) {
      a.row(static_cast<Eigen::Index>(r)) = atoms_.row(order[r]);
      w[static_cast<Eigen::Index>(r)] = weights_[order[r]];
    }
    return AtomicMeasure(std::move(a), std::move(w));
  }

 private:
  Eigen::MatrixXd atoms_;
  Eigen::VectorXd weights_;
};

/// Empirical measure of an agent configuration: weight 1/M on every row.
inline AtomicMeasure empirical(const AgentState& x) {
  if (x.rows() == 0)
    throw std::invalid_argument("empirical: empty agent state");
  return AtomicMeasure::uniform(x);
}

/// Convex combination lambda*mu + (1-lambda)*nu as a single atomic measure.
inline AtomicMeasure mixture(double lambda, const AtomicMeasure& mu,
                             const AtomicMeasure& nu) {
  if (lambda < 0.0 || lambda > 1.0)
    throw std::invalid_argument("mixture: lambda must lie in [0, 1]");
  if (mu.dim() != nu.dim())
    throw std::invalid_argument("mixture: dimension mismatch");
  Eigen::MatrixXd atoms(mu.size() + nu.size(), mu.dim());
  atoms.topRows(mu.size()) = mu.atoms();
  atoms.bottomRows(nu.size()) = nu.atoms();
  Eigen::VectorXd w(mu.size() + nu.size());
  w.head(mu.size()) = lambda * mu.weights();
  w.tail(nu.size()) = (1.0 - lambda) * nu.weights();
  return AtomicMeasure(std::move(atoms), std::move(w));
}

/// Equal-weight tensor-grid quantization of the uniform distribution on the
/// box: points_per_dim midpoints per axis, points_per_dim^dim atoms total.
inline AtomicMeasure grid_quantization(const StateBox& box,
                                       Eigen::Index points_per_dim) {
  if (points_per_dim < 1)
    throw std::invalid_argument("grid_quantization: needs at least one point per axis");
  const Eigen::Index d = box.dim();
  Eigen::Index total = 1;
  for (Eigen::Index c = 0; c < d; ++c) {
    if (total > (1 << 24) / points_per_dim)
      throw std::invalid_argument("grid_quantization: grid too large");
    total *= points_per_dim;
  }
  Eigen::MatrixXd atoms(total, d);
  std::vector<Eigen::Index> digit(static_cast<std::size_t>(d), 0);
  for (Eigen::Index r = 0; r < total; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) {
      const double frac = (static_cast<double>(digit[static_cast<std::size_t>(c)]) + 0.5) /
                          static_cast<double>(points_per_dim);
      atoms(r, c) = box.lower()[c] + frac * (box.upper()[c] - box.lower()[c]);
    }
    for (Eigen::Index c = d - 1; c >= 0; --c) {
      if (++digit[static_cast<std::size_t>(c)] < points_per_dim) break;
      digit[static_cast<std::size_t>(c)] = 0;
    }
  }
  return AtomicMeasure::uniform(std::move(atoms));
}

/// Inner product of the mean embeddings:
/// <Pi_k(mu), Pi_k(nu)> = sum_i sum_j w_i v_j k(x_i, y_j).
inline double kme_inner(const Kernel& k, const AtomicMeasure& mu,
                        const AtomicMeasure& nu) {
  k.domain().require_rows(mu.atoms(), "kme_inner");
  k.domain().require_rows(nu.atoms(), "kme_inner");
  const AtomicMeasure a = mu.sorted();
  const AtomicMeasure b = nu.sorted();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const Eigen::VectorXd row = k.eval_row(a.atom(i), b.atoms());
    acc += a.weights()[i] * row.dot(b.weights());
  }
  return acc;
}

/// Pointwise evaluation of the mean embedding: (Pi_k mu)(z) = sum_i w_i k(z, x_i).
inline double kme_eval(const Kernel& k, const AtomicMeasure& mu,
                       const Point& z) {
  k.domain().require(z, "kme_eval");
  k.domain().require_rows(mu.atoms(), "kme_eval");
  const AtomicMeasure a = mu.sorted();
  return k.eval_row(z, a.atoms()).dot(a.weights());
}

/// Maximum mean discrepancy, the norm distance between mean embeddings.
inline double mmd(const Kernel& k, const AtomicMeasure& mu,
                  const AtomicMeasure& nu) {
  const double radicand = kme_inner(k, mu, mu) - 2.0 * kme_inner(k, mu, nu) +
                          kme_inner(k, nu, nu);
  return detail::sqrt_clamped(radicand, "mmd");
}

// Finite span sum_j c_j k(., z_j): the testable representative of elements
// of the kernel's function space.
struct RkhsCombination {
  Eigen::MatrixXd centers;      // rows are points
  Eigen::VectorXd coefficients;

  double eval(const Kernel& k, const Point& x) const {
    return k.eval_row(x, centers).dot(coefficients);
  }
};

/// Integral of f against mu, computed as the weighted sum of pointwise
/// values. Coincides with <f, Pi_k(mu)> expanded as a double Gram sum; the
/// two evaluation orders agreeing is the reproducing identity.
inline double integrate_rkhs(const Kernel& k, const RkhsCombination& f,
                             const AtomicMeasure& mu) {
  k.domain().require_rows(f.centers, "integrate_rkhs");
  k.domain().require_rows(mu.atoms(), "integrate_rkhs");
  if (f.coefficients.size() != f.centers.rows())
    throw std::invalid_argument(
        "integrate_rkhs: coefficient count must match center count");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < mu.size(); ++i)
    acc += mu.weights()[i] * f.eval(k, mu.atom(i));
  return acc;
}

namespace detail {

// Merge exactly/near coincident consecutive atoms of a sorted measure.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> merged_atoms(
    const AtomicMeasure& mu, double tol) {
  const AtomicMeasure s = mu.sorted();
  std::vector<Eigen::Index> keep;
  Eigen::VectorXd w = s.weights();
  keep.push_back(0);
  for (Eigen::Index i = 1; i < s.size(); ++i) {
    const Eigen::Index head = keep.back();
    const bool same =
        ((s.atoms().row(i) - s.atoms().row(head)).array().abs() <= tol).all();
    if (same)
      w[head] += w[i];
    else
      keep.push_back(i);
  }
  Eigen::MatrixXd atoms(static_cast<Eigen::Index>(keep.size()), s.dim());
  Eigen::VectorXd weights(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t r = 0; r < keep.size(); ++r) {
    atoms.row(static_cast<Eigen::Index>(r)) = s.atoms().row(keep[r]);
    weights[static_cast<Eigen::Index>(r)] = w[keep[r]];
  }
  return {std::move(atoms), std::move(weights)};
}

}  // namespace detail

/// True when mu and nu agree as distributions: after logically merging
/// coincident atoms, the sorted supports match within tol coordinatewise and
/// the merged weights match within tol.
inline bool measure_equal(const AtomicMeasure& mu, const AtomicMeasure& nu,
                          double tol) {
  if (mu.dim() != nu.dim()) return false;
  const auto [ma, mw] = detail::merged_atoms(mu, tol);
  const auto [na, nw] = detail::merged_atoms(nu, tol);
  if (ma.rows() != na.rows()) return false;
  for (Eigen::Index i = 0; i < ma.rows(); ++i) {
    if (!((ma.row(i) - na.row(i)).array().abs() <= tol).all()) return false;
    if (std::abs(mw[i] - nw[i]) > tol) return false;
  }
  return true;
}

}  // namespace mfl
