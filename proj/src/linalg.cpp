// SPDX-License-Identifier: Apache-2.0
#include "hdinfer/linalg.hpp"

#include <cmath>
#include <limits>

namespace hdinfer::linalg {

namespace {

void require_symmetric(const Eigen::MatrixXd& a, double rel_tol = 1e-10) {
  if (a.rows() != a.cols()) {
    throw NotSymmetric("matrix is not square");
  }
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > rel_tol * scale) {
    throw NotSymmetric("matrix is not symmetric within tolerance");
  }
}

}  // namespace

Eigen::MatrixXd SpdFactorization::solve(const Eigen::MatrixXd& b) const {
  Eigen::MatrixXd y =
      factor.triangularView<Eigen::Lower>().solve(b);
  return factor.transpose().triangularView<Eigen::Upper>().solve(y);
}

double SpdFactorization::log_determinant() const {
  return 2.0 * factor.diagonal().array().log().sum();
}

SpdFactorization cholesky(const Eigen::MatrixXd& a) {
  require_symmetric(a);
  const Eigen::Index n = a.rows();
  if (n < 1) {
    throw NotPositiveDefinite("empty matrix");
  }
  const double max_diag = a.diagonal().cwiseAbs().maxCoeff();
  const double pivot_floor =
      static_cast<double>(n) * std::numeric_limits<double>::epsilon() * max_diag;

  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = a(j, j) - l.row(j).head(j).squaredNorm();
    if (pivot <= pivot_floor) {
      throw NotPositiveDefinite("pivot below threshold at column " +
                                std::to_string(j));
    }
    l(j, j) = std::sqrt(pivot);
    if (j + 1 < n) {
      l.col(j).tail(n - j - 1) =
          (a.col(j).tail(n - j - 1) -
           l.bottomLeftCorner(n - j - 1, j) * l.row(j).head(j).transpose()) /
          l(j, j);
    }
  }
  return SpdFactorization{std::move(l)};
}

Eigen::MatrixXd spd_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows()) {
    throw DimensionMismatch("spd_solve: A and B row counts differ");
  }
  return cholesky(a).solve(b);
}

SymEig sym_eig(const Eigen::MatrixXd& a, int max_sweeps) {
  require_symmetric(a);
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd m = a;
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);

  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  const double off_tol = 1e-15 * scale;

  // Cyclic Jacobi: sweep the upper triangle, rotating away each off-diagonal
  // entry until all are negligible.
  bool converged = (n == 1);
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    double max_off = 0.0;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = m(p, q);
        max_off = std::max(max_off, std::abs(apq));
        if (std::abs(apq) <= off_tol) continue;

        const double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        Eigen::VectorXd mp = m.col(p);
        Eigen::VectorXd mq = m.col(q);
        m.col(p) = c * mp - s * mq;
        m.col(q) = s * mp + c * mq;
        Eigen::RowVectorXd rp = m.row(p);
        Eigen::RowVectorXd rq = m.row(q);
        m.row(p) = c * rp - s * rq;
        m.row(q) = s * rp + c * rq;
        m(p, q) = 0.0;
        m(q, p) = 0.0;

        Eigen::VectorXd vp = v.col(p);
        Eigen::VectorXd vq = v.col(q);
        v.col(p) = c * vp - s * vq;
        v.col(q) = s * vp + c * vq;
      }
    }
    if (max_off <= off_tol) converged = true;
  }
  if (!converged) {
    throw NoConvergence("Jacobi eigensolver exceeded sweep limit");
  }

  // Sort descending, carrying the eigenvector columns along.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
    return m(i, i) > m(j, j);
  });

  SymEig out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index src = order[static_cast<std::size_t>(i)];
    out.eigenvalues(i) = m(src, src);
    out.eigenvectors.col(i) = v.col(src);
  }
  return out;
}

double std_normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

double std_normal_quantile(double q) {
  if (!(q > 0.0 && q < 1.0)) {
    throw OutOfDomain("std_normal_quantile: q must lie in (0,1)");
  }

  // Acklam's rational approximation (relative error ~1.15e-9), then one
  // Halley refinement against erfc-based Phi brings the absolute error to
  // machine-precision territory.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};

  const double plow = 0.02425;
  double x;
  if (q < plow) {
    const double u = std::sqrt(-2.0 * std::log(q));
    x = (((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
        ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
  } else if (q <= 1.0 - plow) {
    const double u = q - 0.5;
    const double r = u * u;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        u /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double u = std::sqrt(-2.0 * std::log(1.0 - q));
    x = -(((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
        ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
  }

  const double e = std_normal_cdf(x) - q;
  const double pdf =
      std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  const double u = e / pdf;
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

namespace {

std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stateless 64-bit mix of two words, used to derive stream ids.
std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  return splitmix64_next(s);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), state_(mix64(seed, stream_id)) {}

RngStream RngStream::child(std::uint64_t index) const {
  return RngStream(seed_, mix64(stream_id_ + 1, index));
}

std::uint64_t RngStream::next_u64() { return splitmix64_next(state_); }

double RngStream::next_uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; u1 is shifted into (0,1] to keep the log finite.
  const double u1 =
      (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = next_uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  spare_ = r * std::sin(angle);
  has_spare_ = true;
  return r * std::cos(angle);
}

std::uint64_t RngStream::next_below(std::uint64_t bound) {
  if (bound == 0) {
    throw OutOfDomain("next_below: bound must be positive");
  }
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % bound;
}

Eigen::MatrixXd sample_gaussian_matrix(Eigen::Index rows, Eigen::Index cols,
                                       RngStream& rng) {
  if (rows < 1 || cols < 1) {
    throw OutOfDomain("sample_gaussian_matrix: rows and cols must be >= 1");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      m(i, j) = rng.next_gaussian();
    }
  }
  return m;
}

std::vector<Eigen::Index> sample_without_replacement(Eigen::Index n,
                                                     Eigen::Index k,
                                                     RngStream& rng) {
  if (k < 0 || k > n) {
    throw OutOfDomain("sample_without_replacement: need 0 <= k <= n");
  }
  std::vector<Eigen::Index> pool(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
  std::vector<Eigen::Index> out;
  out.reserve(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) {
    const Eigen::Index j =
        i + static_cast<Eigen::Index>(
                rng.next_below(static_cast<std::uint64_t>(n - i)));
    std::swap(pool[static_cast<std::size_t>(i)],
              pool[static_cast<std::size_t>(j)]);
    out.push_back(pool[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace hdinfer::linalg
