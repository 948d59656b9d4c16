#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "adalign/alignment.hpp"
#include "adalign/embedding_store.hpp"
#include "adalign/error.hpp"

namespace adalign {

struct CcaSolution {
  Matrix h_s_star;  // D x k
  Matrix h_e_star;  // D x k
  Vector correlations;
  double regularization_eps = 0.0;
};

inline double default_cca_eps(const CovarianceBundle& b) {
  const double d = static_cast<double>(b.sigma11.rows());
  return 1e-6 * (b.sigma11.trace() + b.sigma22.trace()) / (2.0 * d);
}

namespace detail {

// (sigma + eps I)^{-1/2}; NotPositiveDefinite when the smallest eigenvalue is
// not meaningfully above zero.
inline Matrix inverse_sqrt_spd(const Matrix& sigma, double eps, const char* which) {
  const Matrix reg = sigma + eps * Matrix::Identity(sigma.rows(), sigma.cols());
  Eigen::SelfAdjointEigenSolver<Matrix> es(reg);
  if (es.info() != Eigen::Success)
    throw Error(ErrorKind::NotPositiveDefinite, "cca_solver", std::string(which) + ": eigensolver failed");
  const Vector& ev = es.eigenvalues();
  const double lo = ev.minCoeff();
  const double hi = std::max(ev.maxCoeff(), 0.0);
  if (!(lo > 0.0) || lo <= 1e-14 * hi)
    throw Error(ErrorKind::NotPositiveDefinite, "cca_solver",
                std::string(which) + " + eps*I has eigenvalue " + std::to_string(lo));
  return es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

/// Symmetric whitening of each view, then SVD of the whitened cross-covariance.
inline CcaSolution cca_fit(const CovarianceBundle& bundle, Eigen::Index k, std::optional<double> eps = std::nullopt) {
  if (!bundle.sigma12)
    throw Error(ErrorKind::MissingCrossCovariance, "cca_solver", "bundle was computed without a pairing");
  const Eigen::Index d = bundle.sigma11.rows();
  if (k < 1 || k > d)
    throw Error(ErrorKind::InvalidArgument, "cca_solver",
                "k = " + std::to_string(k) + " must lie in [1, " + std::to_string(d) + "]");
  const double e = eps ? *eps : default_cca_eps(bundle);
  if (!(e >= 0.0)) throw Error(ErrorKind::InvalidArgument, "cca_solver", "eps must be >= 0");

  const Matrix w1 = detail::inverse_sqrt_spd(bundle.sigma11, e, "sigma11");
  const Matrix w2 = detail::inverse_sqrt_spd(bundle.sigma22, e, "sigma22");
  Eigen::JacobiSVD<Matrix> svd(w1 * (*bundle.sigma12) * w2, Eigen::ComputeFullU | Eigen::ComputeFullV);

  CcaSolution sol;
  sol.h_s_star = w1 * svd.matrixU().leftCols(k);
  sol.h_e_star = w2 * svd.matrixV().leftCols(k);
  sol.correlations = svd.singularValues().head(k);
  sol.regularization_eps = e;
  return sol;
}

/// Correlation of one direction pair: h_sᵀ Σ12 h_e / sqrt(h_sᵀ Σ11 h_s · h_eᵀ Σ22 h_e).
inline double cca_objective(const Vector& h_s, const Vector& h_e, const CovarianceBundle& bundle) {
  if (!bundle.sigma12)
    throw Error(ErrorKind::MissingCrossCovariance, "cca_solver", "bundle was computed without a pairing");
  if (h_s.size() != bundle.sigma11.rows() || h_e.size() != bundle.sigma22.rows())
    throw Error(ErrorKind::ShapeMismatch, "cca_solver", "direction length does not match covariance");
  const double vs = h_s.dot(bundle.sigma11 * h_s);
  const double ve = h_e.dot(bundle.sigma22 * h_e);
  if (!(vs > 0.0))
    throw Error(ErrorKind::DegenerateDirection, "cca_solver", "synthetic direction has zero variance");
  if (!(ve > 0.0))
    throw Error(ErrorKind::DegenerateDirection, "cca_solver", "exemplar direction has zero variance");
  return h_s.dot(*bundle.sigma12 * h_e) / std::sqrt(vs * ve);
}

/// Tr(h_sᵀ Σ12 h_e).
inline double trace_alignment(const Matrix& h_s, const Matrix& h_e, const Matrix& sigma12) {
  if (h_s.rows() != sigma12.rows() || h_e.rows() != sigma12.cols() || h_s.cols() != h_e.cols())
    throw Error(ErrorKind::ShapeMismatch, "cca_solver",
                "h_s " + std::to_string(h_s.rows()) + "x" + std::to_string(h_s.cols()) + ", sigma12 " +
                    std::to_string(sigma12.rows()) + "x" + std::to_string(sigma12.cols()) + ", h_e " +
                    std::to_string(h_e.rows()) + "x" + std::to_string(h_e.cols()));
  return (h_s.transpose() * sigma12 * h_e).trace();
}

/// Nearest exemplar (cosine) for every synthetic row; lowest index wins ties.
inline RowAlignment pseudo_pair(const EmbeddingMatrix& z_s, const EmbeddingMatrix& z_e) {
  if (z_s.dims() != z_e.dims())
    throw Error(ErrorKind::ShapeMismatch, "cca_solver",
                "synthetic dims " + std::to_string(z_s.dims()) + " != exemplar dims " + std::to_string(z_e.dims()));
  if (z_e.rows() < 1) throw Error(ErrorKind::EmptyPairing, "cca_solver", "no exemplar rows");
  const RowMatrix ns = l2_normalize_rows(z_s).data();
  const RowMatrix ne = l2_normalize_rows(z_e).data();
  RowAlignment out;
  out.s_rows.resize(static_cast<std::size_t>(ns.rows()));
  out.e_rows.resize(static_cast<std::size_t>(ns.rows()));
  for (Eigen::Index i = 0; i < ns.rows(); ++i) {
    const Vector scores = ne * ns.row(i).transpose();
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < scores.size(); ++j)
      if (scores(j) > scores(best)) best = j;
    out.s_rows[static_cast<std::size_t>(i)] = static_cast<std::size_t>(i);
    out.e_rows[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
  }
  return out;
}

/// D x k projection padded with zero columns to D x D (map files store square maps).
inline Matrix pad_to_square(const Matrix& h) {
  Matrix out = Matrix::Zero(h.rows(), h.rows());
  out.leftCols(h.cols()) = h;
  return out;
}

}  // namespace adalign
