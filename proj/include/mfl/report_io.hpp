// CSV and JSON serialization of reports, measures and certificates.
// Floating-point values are written with 17 significant digits so that
// serialized reports round-trip losslessly and byte-compare across runs.
#pragma once

#include <cstdio>
#include <sstream>
#include <string>

#include <json.hpp>

#include "mfl/common.hpp"
#include "mfl/convergence.hpp"
#include "mfl/measure.hpp"
#include "mfl/rdp.hpp"

namespace mfl {

using json = nlohmann::json;

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string to_csv(const ConvergenceReport& report) {
  std::ostringstream os;
  os << "M,max,mean,median,n_samples,seed\n";
  for (const auto& e : report.entries)
    os << e.m << ',' << format_double(e.stats.max) << ','
       << format_double(e.stats.mean) << ',' << format_double(e.stats.median)
       << ',' << e.n_samples << ',' << report.seed << '\n';
  return os.str();
}

inline json to_json(const RateFit& fit) {
  return json{{"slope", fit.slope},
              {"intercept", fit.intercept},
              {"residual", fit.residual},
              {"valid", fit.valid}};
}

inline json to_json(const ConvergenceReport& report) {
  json entries = json::array();
  for (const auto& e : report.entries)
    entries.push_back(json{{"M", e.m},
                           {"max", e.stats.max},
                           {"mean", e.stats.mean},
                           {"median", e.stats.median},
                           {"n_samples", e.n_samples}});
  return json{{"experiment", report.experiment},
              {"seed", report.seed},
              {"fit_statistic", report.fit_statistic},
              {"fit", to_json(report.fit)},
              {"entries", entries}};
}

inline json to_json(const TrajectoryBoundCheck& check) {
  return json{{"lhs", check.lhs},
              {"rhs", check.rhs},
              {"residuals", check.residuals},
              {"lip_dynamics", check.lip_dynamics},
              {"holds", check.holds()}};
}

inline json to_json(const AlphaEstimate& est) {
  return json{{"alpha", est.alpha},
              {"min_ratio", est.min_ratio},
              {"vacuous", est.vacuous},
              {"feasible", est.feasible},
              {"n_ratio_samples", est.n_ratio_samples},
              {"n_zero_cost", est.n_zero_cost}};
}

inline json to_json(const RdpCertificate& cert) {
  return json{{"alpha", cert.alpha},
              {"min_residual", cert.min_residual},
              {"pass", cert.pass},
              {"residuals", cert.residuals}};
}

/// A measure serializes as [{"atom": [coords], "weight": w}, ...].
inline json to_json(const AtomicMeasure& mu) {
  json atoms = json::array();
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    json coords = json::array();
    for (Eigen::Index c = 0; c < mu.dim(); ++c)
      coords.push_back(mu.atoms()(i, c));
    atoms.push_back(json{{"atom", coords}, {"weight", mu.weights()[i]}});
  }
  return atoms;
}

inline AtomicMeasure measure_from_json(const json& j) {
  if (!j.is_array() || j.empty())
    throw std::invalid_argument("measure: expected a nonempty array of {atom, weight}");
  const auto& first = j.at(0).at("atom");
  const Eigen::Index dim = static_cast<Eigen::Index>(first.size());
  Eigen::MatrixXd atoms(static_cast<Eigen::Index>(j.size()), dim);
  Eigen::VectorXd weights(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& entry = j.at(i);
    const auto& coords = entry.at("atom");
    if (static_cast<Eigen::Index>(coords.size()) != dim)
      throw std::invalid_argument("measure: inconsistent atom dimensions");
    for (Eigen::Index c = 0; c < dim; ++c)
      atoms(static_cast<Eigen::Index>(i), c) =
          coords.at(static_cast<std::size_t>(c)).get<double>();
    weights[static_cast<Eigen::Index>(i)] = entry.at("weight").get<double>();
  }
  return AtomicMeasure(std::move(atoms), std::move(weights));
}

/// An agent state serializes as an array of point arrays.
inline json to_json_state(const AgentState& x) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    json coords = json::array();
    for (Eigen::Index c = 0; c < x.cols(); ++c) coords.push_back(x(i, c));
    rows.push_back(coords);
  }
  return rows;
}

inline AgentState state_from_json(const json& j) {
  if (!j.is_array() || j.empty())
    throw std::invalid_argument("agent state: expected a nonempty array of points");
  const Eigen::Index dim = static_cast<Eigen::Index>(j.at(0).size());
  AgentState x(static_cast<Eigen::Index>(j.size()), dim);
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (static_cast<Eigen::Index>(j.at(i).size()) != dim)
      throw std::invalid_argument("agent state: inconsistent point dimensions");
    for (Eigen::Index c = 0; c < dim; ++c)
      x(static_cast<Eigen::Index>(i), c) =
          j.at(i).at(static_cast<std::size_t>(c)).get<double>();
  }
  return x;
}

}  // namespace mfl
