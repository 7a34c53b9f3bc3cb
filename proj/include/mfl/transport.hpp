// Exact 1-Wasserstein distance between small atomic measures under the
// kernel metric as ground cost. Uniform equal-size supports go through an
// O(n^3) assignment solve; everything else through a transportation simplex.
//
// This is the independent oracle side of the metric comparison: the maximum
// mean discrepancy of a bounded kernel never exceeds the Kantorovich-
// Rubinstein distance taken with ground metric d_k.
#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include "mfl/common.hpp"
#include "mfl/kernel.hpp"
#include "mfl/measure.hpp"

namespace mfl {

inline constexpr Eigen::Index kWassersteinMaxAtoms = 64;

namespace detail {

// Minimum-cost perfect matching on a square cost matrix via shortest
// augmenting paths with dual potentials. Returns the summed cost.
inline double assignment_cost(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> min_slack(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < min_slack[j]) {
          min_slack[j] = cur;
          way[j] = j0;
        }
        if (min_slack[j] < delta) {
          delta = min_slack[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          min_slack[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (int j = 1; j <= n; ++j) total += cost(match[j] - 1, j - 1);
  return total;
}

// Exact transportation LP:
//   min sum_ij f_ij c_ij   s.t.  sum_j f_ij = supply_i, sum_i f_ij = demand_j,
//                                f >= 0.
// Primal network simplex on the bipartite graph. Entering variable follows
// Bland's least-index rule, which rules out cycling under degeneracy.
inline double transport_cost(const Eigen::VectorXd& supply,
                             const Eigen::VectorXd& demand,
                             const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(supply.size());
  const int m = static_cast<int>(demand.size());
  struct Cell {
    int i, j;
    double flow;
  };

  // Northwest-corner initial basis: exactly n+m-1 cells, possibly with
  // degenerate zero flows.
  std::vector<Cell> basis;
  basis.reserve(static_cast<std::size_t>(n + m - 1));
  {
    Eigen::VectorXd a = supply, b = demand;
    int i = 0, j = 0;
    while (true) {
      const double f = std::min(a[i], b[j]);
      basis.push_back({i, j, f});
      a[i] -= f;
      b[j] -= f;
      if (static_cast<int>(basis.size()) == n + m - 1) break;
      if (i + 1 < n && a[i] <= b[j])
        ++i;
      else if (j + 1 < m)
        ++j;
      else
        ++i;
    }
  }

  // Nodes 0..n-1 are rows, n..n+m-1 columns; the basis is a spanning tree.
  const auto rebuild_adjacency = [&](std::vector<std::vector<int>>& adj) {
    adj.assign(static_cast<std::size_t>(n + m), {});
    for (int c = 0; c < static_cast<int>(basis.size()); ++c) {
      adj[static_cast<std::size_t>(basis[static_cast<std::size_t>(c)].i)].push_back(c);
      adj[static_cast<std::size_t>(n + basis[static_cast<std::size_t>(c)].j)].push_back(c);
    }
  };

  std::vector<std::vector<int>> adj;
  std::vector<double> u(static_cast<std::size_t>(n)), v(static_cast<std::size_t>(m));
  const double enter_eps = 1e-12;
  const long max_pivots = 64L * (n + 1L) * (m + 1L) + 256L;

  for (long pivot = 0;; ++pivot) {
    if (pivot > max_pivots)
      throw numerical_error("transport_cost: simplex failed to converge");

    // Duals from the tree: u_i + v_j = c_ij on every basic cell.
    rebuild_adjacency(adj);
    std::vector<char> seen(static_cast<std::size_t>(n + m), 0);
    std::vector<int> stack = {0};
    u[0] = 0.0;
    seen[0] = 1;
    while (!stack.empty()) {
      const int node = stack.back();
      stack.pop_back();
      for (int c : adj[static_cast<std::size_t>(node)]) {
        const Cell& cell = basis[static_cast<std::size_t>(c)];
        const int other = (node < n) ? n + cell.j : cell.i;
        if (seen[static_cast<std::size_t>(other)]) continue;
        seen[static_cast<std::size_t>(other)] = 1;
        if (node < n)
          v[static_cast<std::size_t>(cell.j)] =
              cost(cell.i, cell.j) - u[static_cast<std::size_t>(cell.i)];
        else
          u[static_cast<std::size_t>(cell.i)] =
              cost(cell.i, cell.j) - v[static_cast<std::size_t>(cell.j)];
        stack.push_back(other);
      }
    }

    // Entering cell: first (row-major) nonbasic cell with negative reduced
    // cost.
    int ei = -1, ej = -1;
    {
      std::vector<char> basic(static_cast<std::size_t>(n * m), 0);
      for (const Cell& c : basis)
        basic[static_cast<std::size_t>(c.i * m + c.j)] = 1;
      for (int i = 0; i < n && ei < 0; ++i) {
        for (int j = 0; j < m; ++j) {
          if (basic[static_cast<std::size_t>(i * m + j)]) continue;
          if (cost(i, j) - u[static_cast<std::size_t>(i)] -
                  v[static_cast<std::size_t>(j)] <
              -enter_eps) {
            ei = i;
            ej = j;
            break;
          }
        }
      }
    }
    if (ei < 0) break;  // optimal

    // Unique tree path from column ej back to row ei; together with the
    // entering cell it closes the pivot cycle.
    std::vector<int> parent_cell(static_cast<std::size_t>(n + m), -1);
    std::vector<int> parent_node(static_cast<std::size_t>(n + m), -1);
    std::vector<char> visited(static_cast<std::size_t>(n + m), 0);
    std::vector<int> queue = {n + ej};
    visited[static_cast<std::size_t>(n + ej)] = 1;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const int node = queue[q];
      if (node == ei) break;
      for (int c : adj[static_cast<std::size_t>(node)]) {
        const Cell& cell = basis[static_cast<std::size_t>(c)];
        const int other = (node < n) ? n + cell.j : cell.i;
        if (visited[static_cast<std::size_t>(other)]) continue;
        visited[static_cast<std::size_t>(other)] = 1;
        parent_cell[static_cast<std::size_t>(other)] = c;
        parent_node[static_cast<std::size_t>(other)] = node;
        queue.push_back(other);
      }
    }

    std::vector<int> path;  // basic cell indices from ej-side to ei
    for (int node = ei; node != n + ej;
         node = parent_node[static_cast<std::size_t>(node)])
      path.push_back(parent_cell[static_cast<std::size_t>(node)]);
    std::reverse(path.begin(), path.end());

    // Alternating signs along the cycle; path position 0 carries -theta.
    double theta = std::numeric_limits<double>::infinity();
    int leaving = -1;
    for (std::size_t p = 0; p < path.size(); p += 2) {
      const Cell& cell = basis[static_cast<std::size_t>(path[p])];
      if (cell.flow < theta ||
          (cell.flow == theta && leaving >= 0 &&
           (cell.i < basis[static_cast<std::size_t>(leaving)].i ||
            (cell.i == basis[static_cast<std::size_t>(leaving)].i &&
             cell.j < basis[static_cast<std::size_t>(leaving)].j)))) {
        theta = cell.flow;
        leaving = path[p];
      }
    }
    for (std::size_t p = 0; p < path.size(); ++p) {
      Cell& cell = basis[static_cast<std::size_t>(path[p])];
      cell.flow += (p % 2 == 0) ? -theta : theta;
      if (cell.flow < 0.0) cell.flow = 0.0;
    }
    basis[static_cast<std::size_t>(leaving)] = {ei, ej, theta};
  }

  double total = 0.0;
  for (const Cell& c : basis) total += c.flow * cost(c.i, c.j);
  return total;
}

}  // namespace detail

/// Exact optimal-transport cost between mu and nu with ground cost d_k.
/// Solves the discrete transport LP; for uniform supports of equal size this
/// reduces to an optimal assignment. Instances above max_atoms total atoms
/// are rejected (the solver is cubic).
inline double wasserstein1(const Kernel& k, const AtomicMeasure& mu,
                           const AtomicMeasure& nu,
                           Eigen::Index max_atoms = kWassersteinMaxAtoms) {
  if (mu.size() + nu.size() > max_atoms)
    throw std::length_error("wasserstein1: too many atoms for the exact solver");
  k.domain().require_rows(mu.atoms(), "wasserstein1");
  k.domain().require_rows(nu.atoms(), "wasserstein1");

  // Zero-weight atoms carry no mass and would only degenerate the LP.
  const auto strip = [](const AtomicMeasure& m) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < m.size(); ++i)
      if (m.weights()[i] > 0.0) keep.push_back(i);
    Eigen::MatrixXd atoms(static_cast<Eigen::Index>(keep.size()), m.dim());
    Eigen::VectorXd w(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t r = 0; r < keep.size(); ++r) {
      atoms.row(static_cast<Eigen::Index>(r)) = m.atoms().row(keep[r]);
      w[static_cast<Eigen::Index>(r)] = m.weights()[keep[r]];
    }
    return AtomicMeasure(std::move(atoms), std::move(w));
  };
  const AtomicMeasure a = strip(mu);
  const AtomicMeasure b = strip(nu);

  Eigen::MatrixXd cost(a.size(), b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i)
    for (Eigen::Index j = 0; j < b.size(); ++j)
      cost(i, j) = kernel_metric(k, a.atom(i), b.atom(j));

  const bool uniform_equal =
      a.size() == b.size() &&
      (a.weights().array() - 1.0 / static_cast<double>(a.size())).abs().maxCoeff() <= 1e-15 &&
      (b.weights().array() - 1.0 / static_cast<double>(b.size())).abs().maxCoeff() <= 1e-15;
  if (uniform_equal)
    return detail::assignment_cost(cost) / static_cast<double>(a.size());
  return detail::transport_cost(a.weights(), b.weights(), cost);
}

}  // namespace mfl
