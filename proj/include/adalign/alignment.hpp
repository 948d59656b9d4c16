#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "adalign/embedding_store.hpp"
#include "adalign/error.hpp"

namespace adalign {

/// Shared Stage-I encoder stand-in. `external` means the features were
/// produced elsewhere (e.g. by a backbone exporter) and pass through.
class SharedEncoder {
 public:
  enum class Kind { identity, fixed_linear, external };

  static SharedEncoder identity() { return SharedEncoder(Kind::identity, {}); }
  static SharedEncoder external() { return SharedEncoder(Kind::external, {}); }

  /// `weights` is D_out x D_in and must have full column rank.
  static SharedEncoder fixed_linear(Matrix weights) {
    if (weights.rows() < 1 || weights.cols() < 1)
      throw Error(ErrorKind::ShapeMismatch, "alignment_stage", "encoder weights are empty");
    Eigen::ColPivHouseholderQR<Matrix> qr(weights);
    if (qr.rank() < weights.cols())
      throw Error(ErrorKind::InvalidArgument, "alignment_stage",
                  "encoder weights have rank " + std::to_string(qr.rank()) + " < " +
                      std::to_string(weights.cols()) + " columns");
    return SharedEncoder(Kind::fixed_linear, std::move(weights));
  }

  Kind kind() const noexcept { return kind_; }
  const Matrix& weights() const noexcept { return weights_; }

 private:
  SharedEncoder(Kind kind, Matrix w) : kind_(kind), weights_(std::move(w)) {}
  Kind kind_;
  Matrix weights_;
};

/// Row-wise application: out_i = W x_i.
inline EmbeddingMatrix apply_encoder(const EmbeddingMatrix& x, const SharedEncoder& enc) {
  if (enc.kind() != SharedEncoder::Kind::fixed_linear) return x;
  if (enc.weights().cols() != x.dims())
    throw Error(ErrorKind::ShapeMismatch, "alignment_stage",
                "encoder expects " + std::to_string(enc.weights().cols()) + " dims, input has " +
                    std::to_string(x.dims()));
  RowMatrix out = x.data() * enc.weights().transpose();
  return EmbeddingMatrix(std::move(out), x.tag(), x.ids());
}

/// Aligned row pairs (s_rows[k], e_rows[k]). Ground-truth pairings are
/// bijections; pseudo-pairings may repeat exemplar rows.
struct RowAlignment {
  std::vector<std::size_t> s_rows;
  std::vector<std::size_t> e_rows;

  static RowAlignment identity(std::size_t n) {
    RowAlignment a;
    a.s_rows.resize(n);
    a.e_rows.resize(n);
    for (std::size_t i = 0; i < n; ++i) a.s_rows[i] = a.e_rows[i] = i;
    return a;
  }

  std::size_t size() const noexcept { return s_rows.size(); }
};

struct CovarianceBundle {
  Matrix sigma11;
  Matrix sigma22;
  std::optional<Matrix> sigma12;
  Vector mean_s;
  Vector mean_e;
  std::size_t n_pairs = 0;
};

/// Divisor-n covariances after centring each domain with its own mean;
/// the cross block uses the same means over the aligned pairs only.
inline CovarianceBundle compute_covariances(const EmbeddingMatrix& z_s, const EmbeddingMatrix& z_e,
                                            const std::optional<RowAlignment>& pairing = std::nullopt) {
  if (z_s.dims() != z_e.dims())
    throw Error(ErrorKind::ShapeMismatch, "alignment_stage",
                "synthetic dims " + std::to_string(z_s.dims()) + " != exemplar dims " + std::to_string(z_e.dims()));
  if (z_s.rows() < 1 || z_e.rows() < 1)
    throw Error(ErrorKind::DimensionMismatch, "alignment_stage", "both domains need at least one row");

  CovarianceBundle b;
  b.mean_s = z_s.data().colwise().mean().transpose();
  b.mean_e = z_e.data().colwise().mean().transpose();
  const RowMatrix cs = z_s.data().rowwise() - b.mean_s.transpose();
  const RowMatrix ce = z_e.data().rowwise() - b.mean_e.transpose();
  b.sigma11 = (cs.transpose() * cs) / static_cast<double>(cs.rows());
  b.sigma22 = (ce.transpose() * ce) / static_cast<double>(ce.rows());
  // Exact symmetry regardless of summation order.
  b.sigma11 = 0.5 * (b.sigma11 + b.sigma11.transpose()).eval();
  b.sigma22 = 0.5 * (b.sigma22 + b.sigma22.transpose()).eval();

  if (pairing) {
    if (pairing->size() == 0)
      throw Error(ErrorKind::EmptyPairing, "alignment_stage", "pairing has no rows");
    if (pairing->s_rows.size() != pairing->e_rows.size())
      throw Error(ErrorKind::ShapeMismatch, "alignment_stage", "pairing index lists differ in length");
    const auto d = z_s.dims();
    Matrix cross = Matrix::Zero(d, d);
    for (std::size_t k = 0; k < pairing->size(); ++k) {
      const auto i = static_cast<Eigen::Index>(pairing->s_rows[k]);
      const auto j = static_cast<Eigen::Index>(pairing->e_rows[k]);
      if (i >= cs.rows() || j >= ce.rows())
        throw Error(ErrorKind::ShapeMismatch, "alignment_stage",
                    "pair " + std::to_string(k) + " (" + std::to_string(i) + ", " + std::to_string(j) +
                        ") out of bounds");
      cross.noalias() += cs.row(i).transpose() * ce.row(j);
    }
    b.sigma12 = cross / static_cast<double>(pairing->size());
    b.n_pairs = pairing->size();
  }
  return b;
}

/// Cross-covariance of per-dimension standardised features (diagonal
/// standardisation only, no full whitening).
inline Matrix standardized_cross_covariance(const CovarianceBundle& b) {
  if (!b.sigma12)
    throw Error(ErrorKind::MissingCrossCovariance, "alignment_stage", "bundle was computed without a pairing");
  const Eigen::Index d = b.sigma11.rows();
  Vector inv_s(d), inv_e(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!(b.sigma11(i, i) > 0.0))
      throw Error(ErrorKind::ZeroVarianceDimension, "alignment_stage",
                  "synthetic dimension " + std::to_string(i) + " has zero variance");
    if (!(b.sigma22(i, i) > 0.0))
      throw Error(ErrorKind::ZeroVarianceDimension, "alignment_stage",
                  "exemplar dimension " + std::to_string(i) + " has zero variance");
    inv_s(i) = 1.0 / std::sqrt(b.sigma11(i, i));
    inv_e(i) = 1.0 / std::sqrt(b.sigma22(i, i));
  }
  return inv_s.asDiagonal() * (*b.sigma12) * inv_e.asDiagonal();
}

/// ‖standardised Σ12 − I‖_F; lower means better cross-domain alignment.
inline double alignment_fnorm(const CovarianceBundle& b) {
  const Matrix c = standardized_cross_covariance(b);
  return (c - Matrix::Identity(c.rows(), c.cols())).norm();
}

}  // namespace adalign
