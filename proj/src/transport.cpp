#include "byzmix/transport.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace byzmix {

namespace {

constexpr int kMaxSide = 64;
constexpr double kPerturbation = 1e-12;

struct Cell {
  int row;
  int col;
};

// Spanning-tree basis of a K x L transportation problem. Nodes 0..K-1 are
// rows, K..K+L-1 are columns; each basic cell is an edge.
class Basis {
 public:
  Basis(int rows, int cols) : K_(rows), L_(cols) {}

  std::vector<Cell> cells;
  std::vector<double> flow;

  void potentials(const Matrix& c, std::vector<double>& u, std::vector<double>& v) const {
    const auto adj = adjacency();
    u.assign(static_cast<std::size_t>(K_), 0.0);
    v.assign(static_cast<std::size_t>(L_), 0.0);
    std::vector<bool> seen(static_cast<std::size_t>(K_ + L_), false);
    std::deque<int> queue{0};
    seen[0] = true;
    while (!queue.empty()) {
      const int node = queue.front();
      queue.pop_front();
      for (int e : adj[static_cast<std::size_t>(node)]) {
        const auto [i, j] = cells[static_cast<std::size_t>(e)];
        const int other = node < K_ ? K_ + j : i;
        if (seen[static_cast<std::size_t>(other)]) continue;
        seen[static_cast<std::size_t>(other)] = true;
        if (node < K_) v[static_cast<std::size_t>(j)] = c(i, j) - u[static_cast<std::size_t>(i)];
        else u[static_cast<std::size_t>(i)] = c(i, j) - v[static_cast<std::size_t>(j)];
        queue.push_back(other);
      }
    }
  }

  // Edges on the tree path from row node `row` to column node `col`, ordered
  // from the row end.
  [[nodiscard]] std::vector<int> path(int row, int col) const {
    const auto adj = adjacency();
    std::vector<int> via(static_cast<std::size_t>(K_ + L_), -1);
    std::vector<bool> seen(static_cast<std::size_t>(K_ + L_), false);
    std::deque<int> queue{row};
    seen[static_cast<std::size_t>(row)] = true;
    const int goal = K_ + col;
    while (!queue.empty() && !seen[static_cast<std::size_t>(goal)]) {
      const int node = queue.front();
      queue.pop_front();
      for (int e : adj[static_cast<std::size_t>(node)]) {
        const auto [i, j] = cells[static_cast<std::size_t>(e)];
        const int other = node < K_ ? K_ + j : i;
        if (seen[static_cast<std::size_t>(other)]) continue;
        seen[static_cast<std::size_t>(other)] = true;
        via[static_cast<std::size_t>(other)] = e;
        queue.push_back(other);
      }
    }
    if (!seen[static_cast<std::size_t>(goal)]) throw NumericalError("transport basis is not a spanning tree");
    std::vector<int> edges;
    for (int node = goal; node != row;) {
      const int e = via[static_cast<std::size_t>(node)];
      edges.push_back(e);
      const auto [i, j] = cells[static_cast<std::size_t>(e)];
      node = node < K_ ? K_ + j : i;
    }
    std::reverse(edges.begin(), edges.end());
    return edges;
  }

  // Flows implied by the tree for the given marginals (leaf elimination).
  [[nodiscard]] std::vector<double> solve_flows(std::span<const double> a, std::span<const double> b) const {
    std::vector<double> rem(static_cast<std::size_t>(K_ + L_));
    for (int i = 0; i < K_; ++i) rem[static_cast<std::size_t>(i)] = a[static_cast<std::size_t>(i)];
    for (int j = 0; j < L_; ++j) rem[static_cast<std::size_t>(K_ + j)] = b[static_cast<std::size_t>(j)];
    const auto adj = adjacency();
    std::vector<int> degree(static_cast<std::size_t>(K_ + L_));
    for (int n = 0; n < K_ + L_; ++n) degree[static_cast<std::size_t>(n)] = static_cast<int>(adj[static_cast<std::size_t>(n)].size());
    std::vector<bool> used(cells.size(), false);
    std::vector<double> out(cells.size(), 0.0);
    std::deque<int> leaves;
    for (int n = 0; n < K_ + L_; ++n)
      if (degree[static_cast<std::size_t>(n)] == 1) leaves.push_back(n);
    while (!leaves.empty()) {
      const int node = leaves.front();
      leaves.pop_front();
      if (degree[static_cast<std::size_t>(node)] != 1) continue;
      int edge = -1;
      for (int e : adj[static_cast<std::size_t>(node)])
        if (!used[static_cast<std::size_t>(e)]) edge = e;
      const auto [i, j] = cells[static_cast<std::size_t>(edge)];
      const int other = node < K_ ? K_ + j : i;
      const double f = std::max(0.0, rem[static_cast<std::size_t>(node)]);
      out[static_cast<std::size_t>(edge)] = f;
      used[static_cast<std::size_t>(edge)] = true;
      rem[static_cast<std::size_t>(node)] -= f;
      rem[static_cast<std::size_t>(other)] -= f;
      --degree[static_cast<std::size_t>(node)];
      if (--degree[static_cast<std::size_t>(other)] == 1) leaves.push_back(other);
    }
    return out;
  }

 private:
  [[nodiscard]] std::vector<std::vector<int>> adjacency() const {
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(K_ + L_));
    for (std::size_t e = 0; e < cells.size(); ++e) {
      adj[static_cast<std::size_t>(cells[e].row)].push_back(static_cast<int>(e));
      adj[static_cast<std::size_t>(K_ + cells[e].col)].push_back(static_cast<int>(e));
    }
    return adj;
  }

  int K_;
  int L_;
};

void check_marginal(std::span<const double> w, const char* name) {
  if (w.empty()) throw std::invalid_argument(std::string("solve_transport: empty ") + name + " marginal");
  if (static_cast<int>(w.size()) > kMaxSide)
    throw std::invalid_argument(std::string("solve_transport: ") + name + " marginal longer than 64");
  double s = 0.0;
  for (double x : w) {
    if (!std::isfinite(x) || x < 0.0) throw std::invalid_argument("solve_transport: marginals must be finite and >= 0");
    s += x;
  }
  if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument(std::string("solve_transport: ") + name + " marginal does not sum to 1");
}

}  // namespace

TransportPlan solve_transport(std::span<const double> source, std::span<const double> target, const Matrix& costs) {
  check_marginal(source, "source");
  check_marginal(target, "target");
  const int K = static_cast<int>(source.size());
  const int L = static_cast<int>(target.size());
  if (costs.rows() != K || costs.cols() != L) throw std::invalid_argument("solve_transport: cost matrix shape mismatch");
  if (!costs.allFinite()) throw std::invalid_argument("solve_transport: costs must be finite");

  // Perturbed marginals keep every basic flow strictly positive.
  std::vector<double> a(source.begin(), source.end());
  std::vector<double> b(target.begin(), target.end());
  for (auto& x : a) x += kPerturbation;
  b.back() += K * kPerturbation;

  Basis basis(K, L);
  {
    std::vector<double> ra = a;
    std::vector<double> rb = b;
    int i = 0;
    int j = 0;
    while (true) {
      const double x = std::max(0.0, std::min(ra[static_cast<std::size_t>(i)], rb[static_cast<std::size_t>(j)]));
      basis.cells.push_back({i, j});
      basis.flow.push_back(x);
      ra[static_cast<std::size_t>(i)] -= x;
      rb[static_cast<std::size_t>(j)] -= x;
      if (i == K - 1 && j == L - 1) break;
      if (j == L - 1 || (i < K - 1 && ra[static_cast<std::size_t>(i)] <= rb[static_cast<std::size_t>(j)])) ++i;
      else ++j;
    }
  }

  const double scale = std::max(1.0, costs.cwiseAbs().maxCoeff());
  const double entering_tol = 1e-12 * scale;
  std::vector<double> u;
  std::vector<double> v;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> is_basic = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(K, L, false);
  for (const auto& c : basis.cells) is_basic(c.row, c.col) = true;

  const int max_pivots = 50 * (K + L) * (K + L) + 1000;
  for (int pivot = 0;; ++pivot) {
    if (pivot > max_pivots) throw NumericalError("solve_transport: pivot limit reached");
    basis.potentials(costs, u, v);
    // Bland: first improving cell in row-major order.
    int ei = -1;
    int ej = -1;
    for (int i = 0; i < K && ei < 0; ++i)
      for (int j = 0; j < L; ++j) {
        if (is_basic(i, j)) continue;
        if (costs(i, j) - u[static_cast<std::size_t>(i)] - v[static_cast<std::size_t>(j)] < -entering_tol) {
          ei = i;
          ej = j;
          break;
        }
      }
    if (ei < 0) break;

    const std::vector<int> cycle = basis.path(ei, ej);
    // Edges at odd positions from the row end (0-based even indices) lose flow.
    double theta = std::numeric_limits<double>::infinity();
    int leaving = -1;
    for (std::size_t k = 0; k < cycle.size(); k += 2) {
      const int e = cycle[k];
      const double f = basis.flow[static_cast<std::size_t>(e)];
      const auto& c = basis.cells[static_cast<std::size_t>(e)];
      const auto& lc = leaving >= 0 ? basis.cells[static_cast<std::size_t>(leaving)] : c;
      if (f < theta || (f == theta && c.row * L + c.col < lc.row * L + lc.col)) {
        theta = f;
        leaving = e;
      }
    }
    for (std::size_t k = 0; k < cycle.size(); ++k) {
      auto& f = basis.flow[static_cast<std::size_t>(cycle[k])];
      f += (k % 2 == 0) ? -theta : theta;
    }
    const auto old = basis.cells[static_cast<std::size_t>(leaving)];
    is_basic(old.row, old.col) = false;
    basis.cells[static_cast<std::size_t>(leaving)] = {ei, ej};
    basis.flow[static_cast<std::size_t>(leaving)] = theta;
    is_basic(ei, ej) = true;
  }

  basis.potentials(costs, u, v);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < L; ++j)
      if (costs(i, j) - u[static_cast<std::size_t>(i)] - v[static_cast<std::size_t>(j)] < -1e-9 * scale)
        throw NumericalError("solve_transport: optimality certificate failed");

  const std::vector<double> flows = basis.solve_flows(source, target);
  TransportPlan out{Matrix::Zero(K, L), 0.0};
  for (std::size_t e = 0; e < basis.cells.size(); ++e)
    out.plan(basis.cells[e].row, basis.cells[e].col) = flows[e];
  out.cost = out.plan.cwiseProduct(costs).sum();
  return out;
}

TransportPlan solve_transport(std::span<const double> source, std::span<const double> target, const CostMatrix& costs) {
  return solve_transport(source, target, costs.entries);
}

}  // namespace byzmix
