#pragma once

// Small dense linear-algebra kernels used by the bound calculators:
// row-major matrices, Gaussian elimination, a Lyapunov-equation solve via
// the n^2 x n^2 linearisation, cyclic-Jacobi symmetric eigendecomposition,
// norm maximisation over hypercube/box vertices, and an active-set
// nonnegative least-squares solver. Everything here is sized for state
// dimensions of at most a few dozen; no attempt is made at large-scale
// performance.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace eic {

using Vec = std::vector<double>;

struct NotHurwitz : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotSymmetric : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionTooLarge : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct Infeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SingularSystem : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SingularGram : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense row-major matrix.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}
  Mat(std::size_t r, std::size_t c, std::initializer_list<double> v)
      : rows(r), cols(c), a(v) {
    if (a.size() != r * c) throw std::invalid_argument("Mat: entry count mismatch");
  }
  Mat(std::size_t r, std::size_t c, Vec v) : rows(r), cols(c), a(std::move(v)) {
    if (a.size() != r * c) throw std::invalid_argument("Mat: entry count mismatch");
  }

  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static Mat diag(const Vec& d) {
    Mat m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  Mat transposed() const {
    Mat m(cols, rows);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) m(j, i) = (*this)(i, j);
    return m;
  }

  Vec col(std::size_t j) const {
    Vec v(rows);
    for (std::size_t i = 0; i < rows; ++i) v[i] = (*this)(i, j);
    return v;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
  }
};

inline Mat operator*(const Mat& lhs, const Mat& rhs) {
  if (lhs.cols != rhs.rows) throw std::invalid_argument("Mat*Mat: dimension mismatch");
  Mat out(lhs.rows, rhs.cols);
  for (std::size_t i = 0; i < lhs.rows; ++i)
    for (std::size_t k = 0; k < lhs.cols; ++k) {
      const double lik = lhs(i, k);
      if (lik == 0.0) continue;
      for (std::size_t j = 0; j < rhs.cols; ++j) out(i, j) += lik * rhs(k, j);
    }
  return out;
}

inline Vec operator*(const Mat& m, const Vec& v) {
  if (m.cols != v.size()) throw std::invalid_argument("Mat*Vec: dimension mismatch");
  Vec out(m.rows, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) s += m(i, j) * v[j];
    out[i] = s;
  }
  return out;
}

inline Mat operator+(const Mat& lhs, const Mat& rhs) {
  if (lhs.rows != rhs.rows || lhs.cols != rhs.cols)
    throw std::invalid_argument("Mat+Mat: dimension mismatch");
  Mat out = lhs;
  for (std::size_t i = 0; i < out.a.size(); ++i) out.a[i] += rhs.a[i];
  return out;
}

inline Mat operator-(const Mat& lhs, const Mat& rhs) {
  if (lhs.rows != rhs.rows || lhs.cols != rhs.cols)
    throw std::invalid_argument("Mat-Mat: dimension mismatch");
  Mat out = lhs;
  for (std::size_t i = 0; i < out.a.size(); ++i) out.a[i] -= rhs.a[i];
  return out;
}

inline Mat operator*(double s, const Mat& m) {
  Mat out = m;
  for (double& v : out.a) v *= s;
  return out;
}

inline double dot(const Vec& u, const Vec& v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

inline double norm(const Vec& v) { return std::sqrt(dot(v, v)); }

inline double max_abs(const Vec& v) {
  double m = 0.0;
  for (double e : v) m = std::max(m, std::abs(e));
  return m;
}

// Gaussian elimination with partial pivoting; A and b are taken by value.
inline Vec solve_linear(Mat A, Vec b) {
  const std::size_t n = A.rows;
  if (A.cols != n || b.size() != n)
    throw std::invalid_argument("solve_linear: system must be square");
  const double scale = std::max(A.max_abs(), 1e-300);
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = std::abs(A(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double v = std::abs(A(i, k));
      if (v > best) {
        best = v;
        piv = i;
      }
    }
    if (best <= 1e-14 * scale) throw SingularSystem("solve_linear: singular pivot");
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(A(k, j), A(piv, j));
      std::swap(b[k], b[piv]);
    }
    const double inv = 1.0 / A(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = A(i, k) * inv;
      if (f == 0.0) continue;
      A(i, k) = 0.0;
      for (std::size_t j = k + 1; j < n; ++j) A(i, j) -= f * A(k, j);
      b[i] -= f * b[k];
    }
  }
  Vec x(n, 0.0);
  for (std::size_t ik = n; ik-- > 0;) {
    double s = b[ik];
    for (std::size_t j = ik + 1; j < n; ++j) s -= A(ik, j) * x[j];
    x[ik] = s / A(ik, ik);
  }
  return x;
}

struct SymEig {
  Vec values;   // ascending
  Mat vectors;  // columns match values
};

// Cyclic Jacobi rotations. The input must be symmetric to 1e-10 (relative to
// its magnitude); the iteration stops once every off-diagonal entry is below
// 1e-12 relative to the initial scale.
inline SymEig sym_eig_full(const Mat& S) {
  const std::size_t n = S.rows;
  if (S.cols != n) throw std::invalid_argument("sym_eig: matrix must be square");
  const double scale = std::max(1.0, S.max_abs());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(S(i, j) - S(j, i)) > 1e-10 * scale)
        throw NotSymmetric("sym_eig: asymmetry above tolerance");

  Mat A = S;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.5 * (A(i, j) + A(j, i));
      A(i, j) = A(j, i) = v;
    }
  Mat V = Mat::identity(n);
  const double tol = 1e-12 * scale;

  for (int sweep = 0; sweep < 128; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off = std::max(off, std::abs(A(p, q)));
    if (off <= tol) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = A(p, q);
        if (std::abs(apq) <= tol * 1e-3) continue;
        const double tau = (A(q, q) - A(p, p)) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = V(k, p), vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return A(i, i) < A(j, j); });
  SymEig out;
  out.values.resize(n);
  out.vectors = Mat(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = A(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = V(i, order[j]);
  }
  return out;
}

inline Vec sym_eig(const Mat& S) { return sym_eig_full(S).values; }

inline double spectral_norm(const Mat& M) {
  if (M.rows == 0 || M.cols == 0) return 0.0;
  // Gram matrix of the smaller side keeps the eigenproblem minimal.
  const bool wide = M.cols > M.rows;
  const Mat Mt = M.transposed();
  const Mat G = wide ? (M * Mt) : (Mt * M);
  Vec ev = sym_eig(G);
  const double lmax = ev.empty() ? 0.0 : ev.back();
  return std::sqrt(std::max(0.0, lmax));
}

// Solves P*M + M^T*P = -Q for symmetric positive-definite Q. Throws
// NotHurwitz when the linearised system is singular, when the solution is
// not positive definite, or when the residual check fails; all three signal
// an eigenvalue of M with nonnegative real part.
inline Mat solve_lyapunov(const Mat& M, const Mat& Q) {
  const std::size_t n = M.rows;
  if (M.cols != n || Q.rows != n || Q.cols != n)
    throw std::invalid_argument("solve_lyapunov: M and Q must be square, same size");
  const double qscale = std::max(1.0, Q.max_abs());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(Q(i, j) - Q(j, i)) > 1e-10 * qscale)
        throw std::invalid_argument("solve_lyapunov: Q must be symmetric");

  // Row-major vec(P); (PM)_{ij} couples p_{ik}, (M^T P)_{ij} couples p_{kj}.
  Mat G(n * n, n * n);
  Vec rhs(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t row = i * n + j;
      for (std::size_t k = 0; k < n; ++k) {
        G(row, i * n + k) += M(k, j);
        G(row, k * n + j) += M(k, i);
      }
      rhs[row] = -Q(i, j);
    }
  }

  Vec p;
  try {
    p = solve_linear(std::move(G), std::move(rhs));
  } catch (const SingularSystem&) {
    throw NotHurwitz("solve_lyapunov: singular system (eigenvalue pair summing to zero)");
  }
  Mat P(n, n, std::move(p));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.5 * (P(i, j) + P(j, i));
      P(i, j) = P(j, i) = v;
    }

  const Vec ev = sym_eig(P);
  if (ev.front() <= 1e-12 * std::max(1.0, std::abs(ev.back())))
    throw NotHurwitz("solve_lyapunov: solution not positive definite");

  const Mat R = P * M + M.transposed() * P + Q;
  if (spectral_norm(R) > 1e-10 * qscale)
    throw NotHurwitz("solve_lyapunov: residual above tolerance");
  return P;
}

namespace detail {

// Max of ||base + C*s|| over s in {0,1}^N, visiting vertices in Gray-code
// order so each step updates one column.
inline double vertex_max_norm(const Mat& C, Vec y) {
  const std::size_t nbits = C.cols;
  if (nbits > 24) throw DimensionTooLarge("vertex enumeration limited to 24 columns");
  const std::size_t k = C.rows;
  double best = dot(y, y);
  const std::uint64_t total = std::uint64_t{1} << nbits;
  for (std::uint64_t i = 1; i < total; ++i) {
    const unsigned j = static_cast<unsigned>(std::countr_zero(i));
    const bool on = ((i ^ (i >> 1)) >> j) & 1u;
    const double sgn = on ? 1.0 : -1.0;
    double ss = 0.0;
    for (std::size_t r = 0; r < k; ++r) {
      y[r] += sgn * C(r, j);
      ss += y[r] * y[r];
    }
    best = std::max(best, ss);
  }
  return std::sqrt(best);
}

}  // namespace detail

// sup over s in [0,1]^N of ||B s||. ||B s|| is convex in s, so the supremum
// is attained at a vertex of the hypercube and vertex enumeration is exact.
inline double cube_norm(const Mat& B) {
  return detail::vertex_max_norm(B, Vec(B.rows, 0.0));
}

// sup over z with lo <= z <= hi (elementwise) of ||M z||; exact by the same
// convexity argument.
inline double box_sup_norm(const Mat& M, const Vec& lo, const Vec& hi) {
  if (lo.size() != M.cols || hi.size() != M.cols)
    throw std::invalid_argument("box_sup_norm: bound dimension mismatch");
  Mat C(M.rows, M.cols);
  Vec base(M.rows, 0.0);
  for (std::size_t j = 0; j < M.cols; ++j)
    for (std::size_t i = 0; i < M.rows; ++i) {
      base[i] += M(i, j) * lo[j];
      C(i, j) = M(i, j) * (hi[j] - lo[j]);
    }
  return detail::vertex_max_norm(C, std::move(base));
}

// Lawson-Hanson active-set nonnegative least squares: minimises ||A q - b||
// subject to q >= 0. Throws Infeasible when the residual floor stays above
// 1e-9 * max(1, ||b||), which signals that b lies outside the conic hull of
// the columns of A.
inline Vec nnls(const Mat& A, const Vec& b) {
  const std::size_t m = A.rows;
  const std::size_t n = A.cols;
  if (b.size() != m) throw std::invalid_argument("nnls: dimension mismatch");

  Vec x(n, 0.0);
  std::vector<char> passive(n, 0);
  std::size_t np = 0;
  Vec r = b;  // residual b - A x
  const double bnorm = norm(b);
  const double wtol = 1e-11 * std::max(1.0, bnorm) * std::max(1.0, A.max_abs());

  auto recompute_residual = [&]() {
    r = b;
    for (std::size_t j = 0; j < n; ++j) {
      if (x[j] == 0.0) continue;
      for (std::size_t i = 0; i < m; ++i) r[i] -= A(i, j) * x[j];
    }
  };

  // Least squares on the passive columns via normal equations; sizes here
  // are tiny so conditioning is not a concern.
  auto passive_ls = [&](const std::vector<std::size_t>& idx) {
    const std::size_t p = idx.size();
    Mat G(p, p);
    Vec rhs(p, 0.0);
    for (std::size_t u = 0; u < p; ++u) {
      for (std::size_t v = u; v < p; ++v) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += A(i, idx[u]) * A(i, idx[v]);
        G(u, v) = G(v, u) = s;
      }
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += A(i, idx[u]) * b[i];
      rhs[u] = s;
    }
    return solve_linear(std::move(G), std::move(rhs));
  };

  const std::size_t outer_cap = 3 * n + 16;
  for (std::size_t outer = 0; outer < outer_cap; ++outer) {
    if (np >= std::min(m, n)) break;
    // Dual vector over the active (zero) set.
    double wmax = 0.0;
    std::size_t jbest = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (passive[j]) continue;
      double w = 0.0;
      for (std::size_t i = 0; i < m; ++i) w += A(i, j) * r[i];
      if (w > wmax) {
        wmax = w;
        jbest = j;
      }
    }
    if (jbest == n || wmax <= wtol) break;
    passive[jbest] = 1;
    ++np;

    for (std::size_t inner = 0; inner < outer_cap; ++inner) {
      std::vector<std::size_t> idx;
      idx.reserve(np);
      for (std::size_t j = 0; j < n; ++j)
        if (passive[j]) idx.push_back(j);
      Vec z;
      try {
        z = passive_ls(idx);
      } catch (const SingularSystem&) {
        // Near-dependent column; drop the newest one and give up on it.
        passive[jbest] = 0;
        --np;
        break;
      }
      bool all_pos = true;
      for (double v : z)
        if (v <= 0.0) {
          all_pos = false;
          break;
        }
      if (all_pos) {
        std::fill(x.begin(), x.end(), 0.0);
        for (std::size_t u = 0; u < idx.size(); ++u) x[idx[u]] = z[u];
        break;
      }
      double alpha = 1.0;
      for (std::size_t u = 0; u < idx.size(); ++u) {
        if (z[u] <= 0.0) {
          const double xi = x[idx[u]];
          const double denom = xi - z[u];
          if (denom > 0.0) alpha = std::min(alpha, xi / denom);
        }
      }
      for (std::size_t u = 0; u < idx.size(); ++u) {
        const std::size_t j = idx[u];
        x[j] += alpha * (z[u] - x[j]);
        if (z[u] <= 0.0 && x[j] <= 1e-14 * std::max(1.0, bnorm)) {
          x[j] = 0.0;
          passive[j] = 0;
          --np;
        }
      }
    }
    recompute_residual();
  }

  recompute_residual();
  if (norm(r) > 1e-9 * std::max(1.0, bnorm))
    throw Infeasible("nnls: residual floor above tolerance");
  return x;
}

}  // namespace eic
