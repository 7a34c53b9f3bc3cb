// Bounded symmetric positive-semidefinite kernels on a compact box, the
// induced kernel metric, and Gram matrices.
//
// Shipped families:
//   gaussian(sigma)            exp(-|x-y|^2 / (2 sigma^2)), bound 1
//   inverse_multiquadric(c)    1 / sqrt(|x-y|^2 + c^2),     bound 1/c
//   augmented(sigma, lambda)   gaussian + lambda (1 + <x,y>)^2
//
// Gaussian and inverse multiquadric are characteristic on the box; the
// augmented family adds a degree-2 polynomial part so that first and second
// moment functionals are exact members of the induced function space.
#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>

#include "mfl/common.hpp"
#include "mfl/state_box.hpp"

namespace mfl {

class Kernel {
 public:
  enum class Family { gaussian, inverse_multiquadric, augmented, custom };

  using EvalFn = std::function<double(const Point&, const Point&)>;

  static Kernel gaussian(StateBox box, double bandwidth) {
    if (!(bandwidth > 0.0))
      throw std::invalid_argument("Kernel: bandwidth must be positive");
    Kernel k(Family::gaussian, std::move(box), "gaussian");
    k.bandwidth_ = bandwidth;
    k.bound_ = 1.0;
    return k;
  }

  static Kernel inverse_multiquadric(StateBox box, double scale) {
    if (!(scale > 0.0))
      throw std::invalid_argument("Kernel: scale must be positive");
    Kernel k(Family::inverse_multiquadric, std::move(box),
             "inverse_multiquadric");
    k.scale_ = scale;
    k.bound_ = 1.0 / scale;
    return k;
  }

  static Kernel augmented(StateBox box, double bandwidth, double poly_weight) {
    if (!(bandwidth > 0.0))
      throw std::invalid_argument("Kernel: bandwidth must be positive");
    if (poly_weight < 0.0)
      throw std::invalid_argument("Kernel: poly_weight must be nonnegative");
    Kernel k(Family::augmented, std::move(box), "augmented");
    k.bandwidth_ = bandwidth;
    k.poly_weight_ = poly_weight;
    // sup over the box of (1 + <x,y>)^2 from the per-coordinate corner
    // products of x_i y_i; <.,.> is separable so the extremes add up.
    double t_min = 0.0, t_max = 0.0;
    for (Eigen::Index i = 0; i < k.box_.dim(); ++i) {
      const double lo = k.box_.lower()[i], hi = k.box_.upper()[i];
      const double p1 = lo * lo, p2 = lo * hi, p3 = hi * hi;
      t_min += std::min(p1, std::min(p2, p3));
      t_max += std::max(p1, std::max(p2, p3));
    }
    const double poly_sup =
        std::max((1.0 + t_min) * (1.0 + t_min), (1.0 + t_max) * (1.0 + t_max));
    k.bound_ = 1.0 + poly_weight * poly_sup;
    return k;
  }

  // User-supplied kernel; the caller asserts boundedness and symmetry.
  // Positive semidefiniteness is not verified here, so downstream radicand
  // checks are what flags a bad kernel.
  static Kernel custom(StateBox box, std::string name, EvalFn fn,
                       double bound) {
    if (!fn) throw std::invalid_argument("Kernel: missing evaluation function");
    if (!(bound > 0.0))
      throw std::invalid_argument("Kernel: bound must be positive");
    Kernel k(Family::custom, std::move(box), std::move(name));
    k.custom_fn_ = std::make_shared<EvalFn>(std::move(fn));
    k.bound_ = bound;
    return k;
  }

  Family family() const { return family_; }
  const std::string& name() const { return name_; }
  const StateBox& domain() const { return box_; }
  /// sup of |k| over domain x domain.
  double bound() const { return bound_; }
  double bandwidth() const { return bandwidth_; }
  double scale() const { return scale_; }
  double poly_weight() const { return poly_weight_; }

  /// k(x, y) without domain checks; callers validate batches up front.
  double eval_unchecked(const Point& x, const Point& y) const {
    switch (family_) {
      case Family::gaussian:
        return std::exp(-(x - y).squaredNorm() /
                        (2.0 * bandwidth_ * bandwidth_));
      case Family::inverse_multiquadric:
        return 1.0 / std::sqrt((x - y).squaredNorm() + scale_ * scale_);
      case Family::augmented: {
        const double g = std::exp(-(x - y).squaredNorm() /
                                  (2.0 * bandwidth_ * bandwidth_));
        const double t = 1.0 + x.dot(y);
        return g + poly_weight_ * t * t;
      }
      case Family::custom:
        return (*custom_fn_)(x, y);
    }
    return 0.0;  // unreachable
  }

  /// Vector of k(x, rows_j) for every row of `rows`.
  Eigen::VectorXd eval_row(const Point& x, const Eigen::MatrixXd& rows) const {
    switch (family_) {
      case Family::gaussian: {
        Eigen::ArrayXd d2 =
            (rows.rowwise() - x.transpose()).rowwise().squaredNorm();
        return (-d2 / (2.0 * bandwidth_ * bandwidth_)).exp();
      }
      case Family::inverse_multiquadric: {
        Eigen::ArrayXd d2 =
            (rows.rowwise() - x.transpose()).rowwise().squaredNorm();
        return (d2 + scale_ * scale_).rsqrt();
      }
      case Family::augmented: {
        Eigen::ArrayXd d2 =
            (rows.rowwise() - x.transpose()).rowwise().squaredNorm();
        Eigen::ArrayXd t = (rows * x).array() + 1.0;
        return (-d2 / (2.0 * bandwidth_ * bandwidth_)).exp() +
               poly_weight_ * t.square();
      }
      case Family::custom: {
        Eigen::VectorXd out(rows.rows());
        for (Eigen::Index j = 0; j < rows.rows(); ++j)
          out[j] = (*custom_fn_)(x, rows.row(j).transpose());
        return out;
      }
    }
    return Eigen::VectorXd();  // unreachable
  }

 private:
  Kernel(Family f, StateBox box, std::string name)
      : family_(f), box_(std::move(box)), name_(std::move(name)) {}

  Family family_;
  StateBox box_;
  std::string name_;
  double bound_ = 0.0;
  double bandwidth_ = 0.0;
  double scale_ = 0.0;
  double poly_weight_ = 0.0;
  std::shared_ptr<EvalFn> custom_fn_;
};

/// k(x, y) with domain validation.
inline double kernel_eval(const Kernel& k, const Point& x, const Point& y) {
  k.domain().require(x, "kernel_eval");
  k.domain().require(y, "kernel_eval");
  return k.eval_unchecked(x, y);
}

/// Gram matrix G[i][j] = k(xs_i, ys_j); rows of xs/ys are points.
inline Eigen::MatrixXd gram(const Kernel& k, const Eigen::MatrixXd& xs,
                            const Eigen::MatrixXd& ys) {
  k.domain().require_rows(xs, "gram");
  k.domain().require_rows(ys, "gram");
  Eigen::MatrixXd g(xs.rows(), ys.rows());
  for (Eigen::Index i = 0; i < xs.rows(); ++i)
    g.row(i) = k.eval_row(xs.row(i).transpose(), ys).transpose();
  return g;
}

namespace detail {

// sqrt with the small-negative clamp shared by kernel_metric and mmd.
inline double sqrt_clamped(double radicand, const char* what) {
  if (radicand < -kPsdTolerance)
    throw numerical_error(std::string(what) +
                          ": squared norm is negative beyond tolerance; "
                          "the kernel is not positive semidefinite");
  return radicand > 0.0 ? std::sqrt(radicand) : 0.0;
}

}  // namespace detail

/// Kernel metric d_k(x, y) = sqrt(k(x,x) - 2 k(x,y) + k(y,y)), the distance
/// between the feature maps of x and y.
inline double kernel_metric(const Kernel& k, const Point& x, const Point& y) {
  k.domain().require(x, "kernel_metric");
  k.domain().require(y, "kernel_metric");
  const double radicand = k.eval_unchecked(x, x) -
                          2.0 * k.eval_unchecked(x, y) +
                          k.eval_unchecked(y, y);
  return detail::sqrt_clamped(radicand, "kernel_metric");
}

}  // namespace mfl
