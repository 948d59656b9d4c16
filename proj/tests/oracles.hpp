#pragma once

// Reference implementations used only by tests. Plain loops over std::vector,
// no Eigen and no library code, so agreement with the library is meaningful.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<double>>;
using Vec = std::vector<double>;

template <class M>
Mat to_mat(const M& m) {
  Mat out(static_cast<std::size_t>(m.rows()), Vec(static_cast<std::size_t>(m.cols())));
  for (long i = 0; i < m.rows(); ++i)
    for (long j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

inline Mat identity(std::size_t n) {
  Mat m(n, Vec(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) m[i][i] = 1.0;
  return m;
}

inline Mat transpose(const Mat& a) {
  Mat t(a[0].size(), Vec(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[0].size(); ++j) t[j][i] = a[i][j];
  return t;
}

inline Mat matmul(const Mat& a, const Mat& b) {
  Mat c(a.size(), Vec(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline Mat minus_identity(Mat a) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i][i] -= 1.0;
  return a;
}

inline double fro(const Mat& a) {
  double s = 0.0;
  for (const auto& r : a)
    for (double v : r) s += v * v;
  return std::sqrt(s);
}

inline double trace(const Mat& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i][i];
  return s;
}

// Gaussian elimination with partial pivoting, in long double.
inline double log_abs_det(const Mat& in) {
  const std::size_t n = in.size();
  std::vector<std::vector<long double>> a(n, std::vector<long double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i][j] = in[i][j];
  long double acc = 0.0L;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::fabs(a[r][c]) > std::fabs(a[p][c])) p = r;
    std::swap(a[p], a[c]);
    if (a[c][c] == 0.0L) return -INFINITY;
    acc += std::log(std::fabs(a[c][c]));
    for (std::size_t r = c + 1; r < n; ++r) {
      const long double f = a[r][c] / a[c][c];
      for (std::size_t j = c; j < n; ++j) a[r][j] -= f * a[c][j];
    }
  }
  return static_cast<double>(acc);
}

inline Mat inverse(const Mat& in) {
  const std::size_t n = in.size();
  std::vector<std::vector<long double>> a(n, std::vector<long double>(2 * n, 0.0L));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) a[i][j] = in[i][j];
    a[i][n + i] = 1.0L;
  }
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::fabs(a[r][c]) > std::fabs(a[p][c])) p = r;
    std::swap(a[p], a[c]);
    const long double d = a[c][c];
    for (auto& v : a[c]) v /= d;
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const long double f = a[r][c];
      for (std::size_t j = 0; j < 2 * n; ++j) a[r][j] -= f * a[c][j];
    }
  }
  Mat out(n, Vec(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i][j] = static_cast<double>(a[i][n + j]);
  return out;
}

// (1/(nD)) Σ ln(1 − tanh(u)^2) with u = z_i · h_d, in long double.
inline double entropy(const Mat& h, const Mat& z) {
  const std::size_t n = z.size(), d = h.size();
  long double acc = 0.0L;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c) {
      long double u = 0.0L;
      for (std::size_t k = 0; k < d; ++k) u += static_cast<long double>(z[i][k]) * h[k][c];
      const long double t = std::tanh(u);
      acc += std::log(1.0L - t * t);
    }
  return static_cast<double>(acc / static_cast<long double>(n * d));
}

enum class Reg { cross, self_orth, hshe };

inline double regularizer(const Mat& hs, const Mat& he, Reg r) {
  switch (r) {
    case Reg::cross: return fro(minus_identity(matmul(he, transpose(hs))));
    case Reg::hshe: return fro(minus_identity(matmul(transpose(hs), he)));
    case Reg::self_orth:
      return 0.5 * (fro(minus_identity(matmul(he, transpose(he)))) + fro(minus_identity(matmul(hs, transpose(hs)))));
  }
  return 0.0;
}

inline double objective(const Mat& hs, const Mat& he, const Mat& zs, const Mat& ze, double lambda, double mu,
                        Reg r) {
  const double im_s = log_abs_det(hs) + mu * entropy(hs, zs);
  const double im_e = log_abs_det(he) + mu * entropy(he, ze);
  return -im_s - im_e + lambda * regularizer(hs, he, r);
}

// Central differences of f over every entry of x.
inline Mat fd_gradient(const std::function<double(const Mat&)>& f, const Mat& x, double step) {
  Mat g(x.size(), Vec(x[0].size()));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x[0].size(); ++j) {
      Mat xp = x, xm = x;
      xp[i][j] += step;
      xm[i][j] -= step;
      g[i][j] = (f(xp) - f(xm)) / (2.0 * step);
    }
  return g;
}

// Normalised Amari index of P.
inline double amari(const Mat& p) {
  const std::size_t n = p.size();
  double rows = 0.0, cols = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double rs = 0.0, rm = 0.0, cs = 0.0, cm = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      rs += std::fabs(p[i][j]);
      rm = std::max(rm, std::fabs(p[i][j]));
      cs += std::fabs(p[j][i]);
      cm = std::max(cm, std::fabs(p[j][i]));
    }
    rows += rs / rm - 1.0;
    cols += cs / cm - 1.0;
  }
  return (rows + cols) / (2.0 * n * (n - 1.0));
}

inline double cosine(const Vec& a, const Vec& b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

// Full ranking of the pool by descending cosine, ascending index on ties.
inline std::vector<std::size_t> rank_pool(const Vec& q, const Mat& pool) {
  Vec s(pool.size());
  for (std::size_t j = 0; j < pool.size(); ++j) s[j] = cosine(q, pool[j]);
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (s[a] != s[b]) return s[a] > s[b];
    return a < b;
  });
  return order;
}

inline double recall(const std::vector<std::size_t>& order, const std::vector<std::size_t>& rel, std::size_t k) {
  std::size_t hits = 0;
  for (std::size_t r : rel)
    for (std::size_t i = 0; i < std::min(k, order.size()); ++i)
      if (order[i] == r) ++hits;
  return static_cast<double>(hits) / rel.size();
}

// Σ_k P(k)·Rel(k) / n_e over the whole list, enumerated literally.
inline double ap(const std::vector<std::size_t>& order, const std::vector<std::size_t>& rel) {
  auto is_rel = [&](std::size_t x) { return std::find(rel.begin(), rel.end(), x) != rel.end(); };
  double acc = 0.0;
  for (std::size_t k = 1; k <= order.size(); ++k) {
    if (!is_rel(order[k - 1])) continue;
    std::size_t in_top = 0;
    for (std::size_t i = 0; i < k; ++i) in_top += is_rel(order[i]) ? 1 : 0;
    acc += static_cast<double>(in_top) / k;
  }
  return acc / rel.size();
}

// Max over unit-vector pairs at 1-degree resolution of the single-direction
// correlation ratio, for D = 2 covariances. Returns the best value (sign-free).
inline double cca_grid_d2(const Mat& s11, const Mat& s22, const Mat& s12) {
  const double pi = std::acos(-1.0);
  double best = 0.0;
  for (int a = 0; a < 180; ++a) {
    const double ta = a * pi / 180.0;
    const Vec hs{std::cos(ta), std::sin(ta)};
    for (int b = 0; b < 180; ++b) {
      const double tb = b * pi / 180.0;
      const Vec he{std::cos(tb), std::sin(tb)};
      double num = 0.0, vs = 0.0, ve = 0.0;
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          num += hs[i] * s12[i][j] * he[j];
          vs += hs[i] * s11[i][j] * hs[j];
          ve += he[i] * s22[i][j] * he[j];
        }
      best = std::max(best, std::fabs(num) / std::sqrt(vs * ve));
    }
  }
  return best;
}

// Second canonical correlation for D = 2. The product of the two canonical
// correlations is |det S12| / sqrt(det S11 det S22), so divide by the grid maximum.
inline double cca_grid_d2_second(const Mat& s11, const Mat& s22, const Mat& s12) {
  auto det = [](const Mat& m) { return m[0][0] * m[1][1] - m[0][1] * m[1][0]; };
  return std::fabs(det(s12)) / std::sqrt(det(s11) * det(s22)) / cca_grid_d2(s11, s22, s12);
}

}  // namespace oracle
