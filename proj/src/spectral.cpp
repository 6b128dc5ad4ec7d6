#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "cadence/error.hpp"
#include "cadence/features.hpp"

namespace cadence {

namespace {

struct Component {
  std::vector<std::uint32_t> nodes;  // ascending global ids
};

std::vector<Component> connected_components(const ScoreGraph& g) {
  std::vector<int> comp(g.n, -1);
  std::vector<Component> out;
  std::vector<std::uint32_t> stack;
  for (std::uint32_t s = 0; s < g.n; ++s) {
    if (comp[s] >= 0) continue;
    Component c;
    const int id = static_cast<int>(out.size());
    comp[s] = id;
    stack.push_back(s);
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      c.nodes.push_back(v);
      for (auto u : g.neighbors_of(v)) {
        if (comp[u] < 0) {
          comp[u] = id;
          stack.push_back(u);
        }
      }
    }
    std::sort(c.nodes.begin(), c.nodes.end());
    out.push_back(std::move(c));
  }
  return out;
}

struct LocalOperator {
  // Component-local view of D^-1/2 A D^-1/2.
  std::vector<std::vector<std::uint32_t>> adj;
  Eigen::VectorXd inv_sqrt_deg;

  LocalOperator(const ScoreGraph& g, const Component& c) {
    const auto m = c.nodes.size();
    adj.resize(m);
    inv_sqrt_deg.resize(static_cast<Eigen::Index>(m));
    for (std::size_t a = 0; a < m; ++a) {
      for (auto u : g.neighbors_of(c.nodes[a])) {
        auto it = std::lower_bound(c.nodes.begin(), c.nodes.end(), u);
        adj[a].push_back(static_cast<std::uint32_t>(it - c.nodes.begin()));
      }
      auto deg = adj[a].size();
      inv_sqrt_deg(static_cast<Eigen::Index>(a)) = deg > 0 ? 1.0 / std::sqrt(static_cast<double>(deg)) : 0.0;
    }
  }

  Eigen::Index size() const { return inv_sqrt_deg.size(); }

  /// y = L x with L = I - D^-1/2 A D^-1/2.
  void laplacian(const Eigen::VectorXd& x, Eigen::VectorXd& y) const {
    y = x;
    for (Eigen::Index a = 0; a < size(); ++a) {
      double acc = 0;
      for (auto b : adj[static_cast<std::size_t>(a)]) acc += inv_sqrt_deg(b) * x(b);
      y(a) -= inv_sqrt_deg(a) * acc;
    }
  }

  Eigen::MatrixXd dense_laplacian() const {
    Eigen::MatrixXd lap = Eigen::MatrixXd::Identity(size(), size());
    for (Eigen::Index a = 0; a < size(); ++a)
      for (auto b : adj[static_cast<std::size_t>(a)]) lap(a, b) -= inv_sqrt_deg(a) * inv_sqrt_deg(b);
    return lap;
  }
};

struct Eigenpairs {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;  // columns
};

Eigenpairs dense_smallest(const LocalOperator& op, int k) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op.dense_laplacian());
  if (es.info() != Eigen::Success) throw NumericError("dense eigensolver did not converge");
  return {es.eigenvalues().head(k), es.eigenvectors().leftCols(k)};
}

// Deterministic pseudo-random start vectors (splitmix64).
Eigen::VectorXd start_vector(Eigen::Index m, std::uint64_t salt) {
  Eigen::VectorXd v(m);
  std::uint64_t s = 0x9e3779b97f4a7c15ull * (salt + 1);
  for (Eigen::Index i = 0; i < m; ++i) {
    std::uint64_t z = (s += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    z ^= z >> 31;
    v(i) = static_cast<double>(z >> 11) / 9007199254740992.0 - 0.5;
  }
  return v;
}

void orthogonalize(Eigen::VectorXd& w, const Eigen::MatrixXd& basis, Eigen::Index cols) {
  for (int pass = 0; pass < 2; ++pass) {
    if (cols == 0) return;
    Eigen::VectorXd coef = basis.leftCols(cols).transpose() * w;
    w -= basis.leftCols(cols) * coef;
  }
}

/// Lanczos on M = 2I - L (largest end of M = smallest end of L) with full
/// reorthogonalization. On breakdown the Krylov space is extended with a fresh
/// orthogonal start vector, so repeated eigenvalues are still found. The
/// Krylov dimension doubles until every wanted Ritz pair has a small residual.
Eigenpairs lanczos_smallest(const LocalOperator& op, int k, double tol) {
  const Eigen::Index n = op.size();
  Eigen::Index dim = std::min<Eigen::Index>(n, std::max<Eigen::Index>(4 * k, 80));
  Eigen::VectorXd tmp(n), y(n);
  for (;;) {
    Eigen::MatrixXd basis(n, dim);
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(dim), beta = Eigen::VectorXd::Zero(dim);
    std::uint64_t restarts = 0;
    Eigen::VectorXd v = start_vector(n, restarts);
    v.normalize();
    Eigen::Index cols = 0;
    while (cols < dim) {
      basis.col(cols) = v;
      op.laplacian(v, tmp);
      Eigen::VectorXd w = 2.0 * v - tmp;
      alpha(cols) = v.dot(w);
      orthogonalize(w, basis, cols + 1);
      ++cols;
      if (cols == dim) break;
      double b = w.norm();
      if (b < 1e-10) {
        // Invariant subspace reached: continue from a new orthogonal direction.
        Eigen::VectorXd fresh;
        double fn = 0;
        for (int attempt = 0; attempt < 8 && fn < 1e-6; ++attempt) {
          fresh = start_vector(n, ++restarts);
          orthogonalize(fresh, basis, cols);
          fn = fresh.norm();
        }
        if (fn < 1e-6) break;
        beta(cols - 1) = 0.0;
        v = fresh / fn;
      } else {
        beta(cols - 1) = b;
        v = w / b;
      }
    }
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(cols, cols);
    for (Eigen::Index i = 0; i < cols; ++i) {
      t(i, i) = alpha(i);
      if (i + 1 < cols) t(i, i + 1) = t(i + 1, i) = beta(i);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    if (es.info() != Eigen::Success) throw NumericError("tridiagonal eigensolver did not converge");

    const int want = static_cast<int>(std::min<Eigen::Index>(k, cols));
    Eigenpairs out;
    out.values.resize(want);
    out.vectors.resize(n, want);
    bool converged = true;
    for (int j = 0; j < want; ++j) {
      Eigen::Index idx = cols - 1 - j;  // largest theta first
      y = basis.leftCols(cols) * es.eigenvectors().col(idx);
      y.normalize();
      double lambda = 2.0 - es.eigenvalues()(idx);
      op.laplacian(y, tmp);
      if ((tmp - lambda * y).norm() > tol) converged = false;
      out.values(j) = lambda;
      out.vectors.col(j) = y;
    }
    if (converged && want == std::min<Eigen::Index>(k, n)) return out;
    if (dim == n) {
      if (want == std::min<Eigen::Index>(k, n)) return out;  // full space: exact up to rounding
      throw NumericError("Lanczos iteration did not converge");
    }
    dim = std::min<Eigen::Index>(n, 2 * dim);
  }
}

}  // namespace

SpectralResult laplacian_eigenvectors(const ScoreGraph& adjacency, const SpectralOptions& opts) {
  const Eigen::Index n = adjacency.n;
  const int k = opts.k;
  SpectralResult result;
  result.values = Eigen::VectorXd::Zero(k);
  result.vectors = Eigen::MatrixXd::Zero(n, k);
  result.found = static_cast<int>(std::min<Eigen::Index>(n, k));
  if (n == 0 || k == 0) return result;

  struct Pair {
    double value;
    std::size_t comp;
    Eigen::Index col;
  };
  std::vector<Pair> pairs;
  auto comps = connected_components(adjacency);
  std::vector<Eigenpairs> local(comps.size());
  for (std::size_t c = 0; c < comps.size(); ++c) {
    LocalOperator op(adjacency, comps[c]);
    const int want = static_cast<int>(std::min<Eigen::Index>(op.size(), k));
    try {
      local[c] = comps[c].nodes.size() <= opts.dense_limit ? dense_smallest(op, want) : lanczos_smallest(op, want, 1e-9);
    } catch (const NumericError& e) {
      throw NumericError("spectral features for piece '" + opts.piece_id + "': " + e.what());
    }
    for (Eigen::Index j = 0; j < local[c].values.size(); ++j) pairs.push_back({local[c].values(j), c, j});
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.value < b.value; });

  for (int j = 0; j < result.found; ++j) {
    const auto& p = pairs[static_cast<std::size_t>(j)];
    result.values(j) = p.value;
    const auto& nodes = comps[p.comp].nodes;
    Eigen::VectorXd col = local[p.comp].vectors.col(p.col);
    col.normalize();
    for (Eigen::Index a = 0; a < col.size(); ++a) {
      if (std::abs(col(a)) > 1e-8) {
        if (col(a) < 0) col = -col;
        break;
      }
    }
    for (std::size_t a = 0; a < nodes.size(); ++a) result.vectors(nodes[a], j) = col(static_cast<Eigen::Index>(a));
  }
  return result;
}

FeatureBlock spectral_features(const ScoreGraph& adjacency, const SpectralOptions& opts) {
  FeatureBlock fb;
  for (int j = 0; j < opts.k; ++j) fb.manifest.add("laplacian_eigvec_" + std::to_string(j), FeatureCategory::SPECTRAL, -1, 1);
  fb.values = laplacian_eigenvectors(adjacency, opts).vectors;
  return fb;
}

}  // namespace cadence
