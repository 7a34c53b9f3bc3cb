// Axis-aligned compact box: the state domain for kernels, measures and
// multiagent dynamics.
#pragma once

#include <sstream>
#include <stdexcept>

#include "mfl/common.hpp"

namespace mfl {

class StateBox {
 public:
  StateBox(Eigen::VectorXd lower, Eigen::VectorXd upper)
      : lower_(std::move(lower)), upper_(std::move(upper)) {
    if (lower_.size() == 0 || lower_.size() != upper_.size())
      throw std::invalid_argument("StateBox: bounds must be nonempty vectors of equal dimension");
    for (Eigen::Index i = 0; i < lower_.size(); ++i) {
      if (!(lower_[i] < upper_[i])) {
        std::ostringstream os;
        os << "StateBox: lower[" << i << "]=" << lower_[i]
           << " must be strictly below upper[" << i << "]=" << upper_[i];
        throw std::invalid_argument(os.str());
      }
    }
  }

  /// Cube [lo, hi]^dim.
  static StateBox cube(Eigen::Index dim, double lo, double hi) {
    return StateBox(Eigen::VectorXd::Constant(dim, lo),
                    Eigen::VectorXd::Constant(dim, hi));
  }

  /// The unit box [0, 1]^dim.
  static StateBox unit(Eigen::Index dim) { return cube(dim, 0.0, 1.0); }

  Eigen::Index dim() const { return lower_.size(); }
  const Eigen::VectorXd& lower() const { return lower_; }
  const Eigen::VectorXd& upper() const { return upper_; }

  bool contains(const Point& x) const {
    if (x.size() != dim()) return false;
    return (x.array() >= lower_.array()).all() &&
           (x.array() <= upper_.array()).all();
  }

  /// True when every row of the matrix is a point inside the box.
  bool contains_rows(const Eigen::MatrixXd& rows) const {
    if (rows.cols() != dim()) return false;
    for (Eigen::Index i = 0; i < rows.rows(); ++i)
      if (!contains(rows.row(i).transpose())) return false;
    return true;
  }

  void require(const Point& x, const char* what) const {
    if (!contains(x))
      throw std::domain_error(std::string(what) + ": point outside the state box");
  }

  void require_rows(const Eigen::MatrixXd& rows, const char* what) const {
    if (!contains_rows(rows))
      throw std::domain_error(std::string(what) + ": point outside the state box");
  }

  Point clamp(const Point& x) const {
    return x.array().max(lower_.array()).min(upper_.array());
  }

  /// Euclidean length of the box diagonal.
  double diameter() const { return (upper_ - lower_).norm(); }

  bool operator==(const StateBox& other) const {
    return lower_ == other.lower_ && upper_ == other.upper_;
  }

 private:
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
};

}  // namespace mfl
