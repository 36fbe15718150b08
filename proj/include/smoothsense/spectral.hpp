#ifndef SMOOTHSENSE_SPECTRAL_HPP
#define SMOOTHSENSE_SPECTRAL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "smoothsense/errors.hpp"
#include "smoothsense/graph.hpp"

namespace smoothsense {

/// K = X X^T.
inline Matrix linear_kernel(const Matrix& x) {
  if (!x.allFinite()) throw invalid_input("linear kernel of non-finite representations");
  Matrix k = x * x.transpose();
  return k;
}

/// W = (|K| + |K^T|) / 2, exactly symmetric and nonnegative.
inline Matrix symmetrize(const Matrix& k) {
  if (k.rows() != k.cols()) throw dimension_mismatch("symmetrize needs a square matrix");
  const Index n = k.rows();
  Matrix w(n, n);
  for (Index i = 0; i < n; ++i) {
    w(i, i) = std::abs(k(i, i));
    for (Index j = i + 1; j < n; ++j) {
      const double v = 0.5 * (std::abs(k(i, j)) + std::abs(k(j, i)));
      w(i, j) = v;
      w(j, i) = v;
    }
  }
  return w;
}

struct EigenPairs {
  Vector values;          // descending
  Eigen::MatrixXd vectors;  // n x r, orthonormal columns
  int iterations = 0;     // Lanczos steps; 0 for the dense path
  bool used_lanczos = false;
};

struct EigenOptions {
  /// Dense tridiagonal QR up to this size, Lanczos above.
  Index dense_max_nodes = 1000;
  /// Required residual ||W v - lambda v|| relative to ||W||_F.
  double tolerance = 1e-10;
  std::uint64_t seed = 0x5eed;
};

namespace detail {

/// Flips each column so its largest-magnitude entry is positive.
inline void canonical_signs(Eigen::MatrixXd& vectors) {
  for (Index c = 0; c < vectors.cols(); ++c) {
    Index arg = 0;
    vectors.col(c).cwiseAbs().maxCoeff(&arg);
    if (vectors(arg, c) < 0.0) vectors.col(c) *= -1.0;
  }
}

inline EigenPairs dense_top(const Matrix& w, int r) {
  const Index n = w.rows();
  // Row-major storage of a symmetric matrix reads the same as column-major.
  Eigen::Map<const Eigen::MatrixXd> sym(w.data(), n, n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw convergence_failure("dense symmetric eigensolver did not converge (n = " +
                              std::to_string(n) + ")");
  }
  EigenPairs out;
  out.values.resize(r);
  out.vectors.resize(n, r);
  for (int c = 0; c < r; ++c) {
    out.values[c] = solver.eigenvalues()[n - 1 - c];
    out.vectors.col(c) = solver.eigenvectors().col(n - 1 - c);
  }
  canonical_signs(out.vectors);
  return out;
}

}  // namespace detail

/// Top-r eigenpairs of a symmetric operator given only its action y = W x.
///
/// Lanczos with full reorthogonalization. The Krylov basis grows until every
/// requested Ritz pair meets the residual tolerance (checked explicitly).
/// Breakdowns restart from a fresh random direction orthogonal to the basis.
template <class MatVec>
EigenPairs lanczos_top(MatVec&& apply, Index n, int r, double frobenius_norm,
                       const EigenOptions& options = {}) {
  if (r < 1 || r > n) throw invalid_input("requested eigenpair count outside 1..n");
  const double scale = frobenius_norm > 0.0 ? frobenius_norm : 1.0;
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Eigen::MatrixXd basis(n, 0);
  std::vector<double> alpha, beta;  // beta[j] couples basis j and j+1

  auto random_orthogonal = [&]() -> Vector {
    for (int attempt = 0; attempt < 5; ++attempt) {
      Vector v(n);
      for (Index i = 0; i < n; ++i) v[i] = normal(rng);
      for (int pass = 0; pass < 2; ++pass) {
        if (basis.cols() > 0) v -= basis * (basis.transpose() * v);
      }
      const double norm = v.norm();
      if (norm > 1e-8 * std::sqrt(static_cast<double>(n))) return v / norm;
    }
    return Vector();
  };

  Index target = std::min<Index>(n, std::max<Index>(2 * r + 20, 40));
  Vector q = random_orthogonal();
  Vector residual;
  int steps = 0;
  for (;;) {
    while (basis.cols() < target) {
      const Index j = basis.cols();
      basis.conservativeResize(n, j + 1);
      basis.col(j) = q;
      Vector w = apply(q);
      ++steps;
      const double a = q.dot(w);
      alpha.push_back(a);
      for (int pass = 0; pass < 2; ++pass) w -= basis * (basis.transpose() * w);
      const double b = w.norm();
      if (j + 1 == n) break;
      if (b > 1e-12 * scale) {
        beta.push_back(b);
        q = w / b;
      } else {
        beta.push_back(0.0);
        q = random_orthogonal();
        if (q.size() == 0) break;
      }
    }
    const Index k = basis.cols();
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k, k);
    for (Index j = 0; j < k; ++j) {
      t(j, j) = alpha[static_cast<std::size_t>(j)];
      if (j + 1 < k) {
        t(j, j + 1) = beta[static_cast<std::size_t>(j)];
        t(j + 1, j) = beta[static_cast<std::size_t>(j)];
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(t);
    const int have = static_cast<int>(std::min<Index>(r, k));
    EigenPairs out;
    out.values.resize(have);
    out.vectors.resize(n, have);
    double worst = 0.0;
    for (int c = 0; c < have; ++c) {
      out.values[c] = small.eigenvalues()[k - 1 - c];
      Vector v = basis * small.eigenvectors().col(k - 1 - c);
      v.normalize();
      out.vectors.col(c) = v;
      residual = apply(v) - out.values[c] * v;
      worst = std::max(worst, residual.norm());
    }
    if (have == r && worst <= options.tolerance * scale) {
      detail::canonical_signs(out.vectors);
      out.iterations = steps;
      out.used_lanczos = true;
      return out;
    }
    if (k >= n || q.size() == 0) {
      throw convergence_failure("Lanczos stalled after " + std::to_string(steps) +
                                " steps with basis " + std::to_string(k) +
                                ", worst residual " + std::to_string(worst) + " vs tolerance " +
                                std::to_string(options.tolerance * scale));
    }
    target = std::min<Index>(n, 2 * k);
  }
}

/// Eigenvectors for the r largest eigenvalues of a symmetric W, descending.
inline EigenPairs top_eigenvectors(const Matrix& w, int r, const EigenOptions& options = {}) {
  if (w.rows() != w.cols()) throw dimension_mismatch("eigenvectors need a square matrix");
  const Index n = w.rows();
  if (r < 1 || r > n) {
    throw invalid_input("requested " + std::to_string(r) + " eigenvectors of a " +
                        std::to_string(n) + "-node matrix");
  }
  if (n <= options.dense_max_nodes) return detail::dense_top(w, r);
  return lanczos_top([&w](const Vector& v) -> Vector { return w * v; }, n, r, w.norm(), options);
}

/// W v for W = symmetrize(X X^T) without materializing W, one row block at a time.
class BlockKernelOperator {
 public:
  explicit BlockKernelOperator(const Matrix& x, Index block_rows = 512)
      : x_(x), block_(std::max<Index>(1, block_rows)) {}

  Vector operator()(const Vector& v) const {
    const Index n = x_.rows();
    Vector y = Vector::Zero(n);
    for (Index start = 0; start < n; start += block_) {
      const Index rows = std::min(block_, n - start);
      Matrix block = (x_.middleRows(start, rows) * x_.transpose()).cwiseAbs();
      y.segment(start, rows).noalias() += block * v;
      y.noalias() += block.transpose() * v.segment(start, rows);
    }
    return 0.5 * y;
  }

  double frobenius_norm() const {
    const Index n = x_.rows();
    double total = 0.0;
    for (Index start = 0; start < n; start += block_) {
      const Index rows = std::min(block_, n - start);
      total += (x_.middleRows(start, rows) * x_.transpose()).squaredNorm();
    }
    return std::sqrt(total);
  }

 private:
  const Matrix& x_;
  Index block_;
};

struct KMeansOptions {
  int restarts = 10;
  int max_iters = 100;
};

struct KMeansResult {
  std::vector<int> assignments;
  Matrix centroids;
  double inertia = 0.0;
  int iterations = 0;
  /// Inertia after every Lloyd iteration of the winning restart.
  std::vector<double> inertia_trace;
};

namespace detail {

inline double squared_distance(const Matrix& a, Index i, const Matrix& b, Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

inline Matrix plus_plus_seeds(const Matrix& points, int r, std::mt19937_64& rng) {
  const Index n = points.rows();
  Matrix centroids(r, points.cols());
  std::uniform_int_distribution<Index> pick(0, n - 1);
  centroids.row(0) = points.row(pick(rng));
  std::vector<double> nearest(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  for (int c = 1; c < r; ++c) {
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
      auto& d = nearest[static_cast<std::size_t>(i)];
      d = std::min(d, squared_distance(points, i, centroids, c - 1));
      total += d;
    }
    Index chosen = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      chosen = n - 1;
      for (Index i = 0; i < n; ++i) {
        target -= nearest[static_cast<std::size_t>(i)];
        if (target < 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);
    }
    centroids.row(c) = points.row(chosen);
  }
  return centroids;
}

inline KMeansResult lloyd(const Matrix& points, Matrix centroids, int max_iters) {
  const Index n = points.rows();
  const int r = static_cast<int>(centroids.rows());
  KMeansResult res;
  res.assignments.assign(static_cast<std::size_t>(n), -1);
  std::vector<double> cost(static_cast<std::size_t>(n), 0.0);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    std::vector<Index> sizes(static_cast<std::size_t>(r), 0);
    for (Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = squared_distance(points, i, centroids, 0);
      for (int c = 1; c < r; ++c) {
        const double d = squared_distance(points, i, centroids, c);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      auto& a = res.assignments[static_cast<std::size_t>(i)];
      changed = changed || a != best;
      a = best;
      cost[static_cast<std::size_t>(i)] = best_d;
      ++sizes[static_cast<std::size_t>(best)];
    }
    // Empty cluster: move the worst-served point of a multi-member cluster into it.
    for (int c = 0; c < r; ++c) {
      if (sizes[static_cast<std::size_t>(c)] > 0) continue;
      Index worst = -1;
      for (Index i = 0; i < n; ++i) {
        const int a = res.assignments[static_cast<std::size_t>(i)];
        if (sizes[static_cast<std::size_t>(a)] < 2) continue;
        if (worst < 0 || cost[static_cast<std::size_t>(i)] > cost[static_cast<std::size_t>(worst)]) {
          worst = i;
        }
      }
      if (worst < 0) break;
      --sizes[static_cast<std::size_t>(res.assignments[static_cast<std::size_t>(worst)])];
      res.assignments[static_cast<std::size_t>(worst)] = c;
      sizes[static_cast<std::size_t>(c)] = 1;
      cost[static_cast<std::size_t>(worst)] = 0.0;
      centroids.row(c) = points.row(worst);
      changed = true;
    }
    Matrix sums = Matrix::Zero(r, points.cols());
    for (Index i = 0; i < n; ++i) sums.row(res.assignments[static_cast<std::size_t>(i)]) += points.row(i);
    for (int c = 0; c < r; ++c) {
      if (sizes[static_cast<std::size_t>(c)] > 0) {
        centroids.row(c) = sums.row(c) / static_cast<double>(sizes[static_cast<std::size_t>(c)]);
      }
    }
    double inertia = 0.0;
    for (Index i = 0; i < n; ++i) {
      inertia += squared_distance(points, i, centroids, res.assignments[static_cast<std::size_t>(i)]);
    }
    res.inertia_trace.push_back(inertia);
    res.inertia = inertia;
    res.iterations = iter + 1;
    if (!changed) break;
  }
  res.centroids = std::move(centroids);
  return res;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding, best of `restarts` by inertia.
inline KMeansResult kmeans(const Matrix& points, int r, std::uint64_t seed,
                           const KMeansOptions& options = {}) {
  if (r < 1) throw invalid_input("k-means needs at least one cluster");
  if (points.rows() < r) {
    throw invalid_input("k-means with " + std::to_string(r) + " clusters on " +
                        std::to_string(points.rows()) + " points");
  }
  if (!points.allFinite()) throw invalid_input("k-means on non-finite points");
  std::mt19937_64 rng(seed);
  KMeansResult best;
  bool have = false;
  for (int restart = 0; restart < std::max(1, options.restarts); ++restart) {
    Matrix seeds = detail::plus_plus_seeds(points, r, rng);
    KMeansResult res = detail::lloyd(points, std::move(seeds), std::max(1, options.max_iters));
    if (!have || res.inertia < best.inertia) {
      best = std::move(res);
      have = true;
    }
  }
  return best;
}

/// Node-to-cluster assignment together with the spectral embedding behind it.
struct ClusterPartition {
  std::vector<int> assignments;
  int clusters = 0;
  Matrix embedding;  // n x r
  Vector eigenvalues;
  double inertia = 0.0;
};

struct ClusterOptions {
  EigenOptions eigen;
  KMeansOptions kmeans;
  /// Above this node count W is never materialized.
  Index kernel_dense_max_nodes = 8000;
  /// Scale embedding rows to unit length before k-means.
  bool row_normalize = false;
};

/// Linear kernel, symmetrization, top-r eigenvectors, k-means on the embedding.
inline ClusterPartition cluster(const Matrix& representations, int r, std::uint64_t seed,
                                const ClusterOptions& options = {}) {
  const Index n = representations.rows();
  if (r < 1 || n < r) {
    throw invalid_input("cannot form " + std::to_string(r) + " clusters from " +
                        std::to_string(n) + " nodes");
  }
  EigenPairs eig;
  if (n <= options.kernel_dense_max_nodes) {
    eig = top_eigenvectors(symmetrize(linear_kernel(representations)), r, options.eigen);
  } else {
    BlockKernelOperator op(representations);
    eig = lanczos_top(op, n, r, op.frobenius_norm(), options.eigen);
  }
  ClusterPartition out;
  out.clusters = r;
  out.eigenvalues = eig.values;
  out.embedding = eig.vectors;
  Matrix points = out.embedding;
  if (options.row_normalize) {
    for (Index i = 0; i < n; ++i) {
      const double norm = points.row(i).norm();
      if (norm > 0.0) points.row(i) /= norm;
    }
  }
  KMeansResult km = kmeans(points, r, seed, options.kmeans);
  out.assignments = std::move(km.assignments);
  out.inertia = km.inertia;
  return out;
}

}  // namespace smoothsense

#endif  // SMOOTHSENSE_SPECTRAL_HPP
