#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "adalign/embedding_store.hpp"
#include "adalign/error.hpp"
#include "adalign/synthetic.hpp"

namespace adalign {

enum class RegVariant { cross, self_orth, hshe };
enum class InitKind { identity, random_same, random_diff };

inline std::string_view to_string(RegVariant v) {
  switch (v) {
    case RegVariant::cross: return "cross";
    case RegVariant::self_orth: return "self";
    case RegVariant::hshe: return "hshe";
  }
  return "unknown";
}

inline std::string_view to_string(InitKind k) {
  switch (k) {
    case InitKind::identity: return "identity";
    case InitKind::random_same: return "rand-same";
    case InitKind::random_diff: return "rand-diff";
  }
  return "unknown";
}

struct InitMode {
  InitKind kind = InitKind::identity;
  std::uint64_t seed_s = 0;
  std::uint64_t seed_e = 1;  // random_diff only
};

struct TrainConfig {
  double lambda = 0.1;
  double mu = 1.0;
  double learning_rate = 1e-3;
  std::size_t epochs = 10;
  std::size_t batch_size = 1024;
  RegVariant reg_variant = RegVariant::self_orth;
  InitMode init{};
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const {
    auto bad = [](const std::string& what) {
      throw Error(ErrorKind::InvalidArgument, "disentanglement_trainer", what);
    };
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) bad("lambda must be >= 0");
    if (!(mu > 0.0) || !std::isfinite(mu)) bad("mu must be > 0");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) bad("learning_rate must be > 0");
    if (batch_size < 1) bad("batch_size must be >= 1");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
      bad("Adam betas must lie in [0, 1)");
    if (!(adam_eps > 0.0)) bad("adam_eps must be > 0");
  }
};

struct AdamState {
  Matrix m_s, v_s, m_e, v_e;
  std::uint64_t step = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double objective = 0.0;
  double infomax_s = 0.0;
  double infomax_e = 0.0;
  double reg = 0.0;
  double logdet_s = 0.0;
  double logdet_e = 0.0;
};

/// Haar-distributed orthogonal matrix (QR of a Gaussian, signs fixed).
inline Matrix random_orthogonal(Eigen::Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) g(i, j) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < d; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

struct LinearMapPair {
  Matrix h_s;
  Matrix h_e;
  InitMode init{};
  AdamState adam{};
  std::vector<EpochRecord> history;

  static LinearMapPair initialize(Eigen::Index d, const InitMode& init) {
    LinearMapPair p;
    p.init = init;
    switch (init.kind) {
      case InitKind::identity:
        p.h_s = p.h_e = Matrix::Identity(d, d);
        break;
      case InitKind::random_same:
        p.h_s = p.h_e = random_orthogonal(d, init.seed_s);
        break;
      case InitKind::random_diff:
        p.h_s = random_orthogonal(d, init.seed_s);
        p.h_e = random_orthogonal(d, init.seed_e);
        break;
    }
    p.adam.m_s = p.adam.v_s = p.adam.m_e = p.adam.v_e = Matrix::Zero(d, d);
    return p;
  }
};

inline constexpr double kMinAbsDet = 1e-12;

/// ln|det h| via partial-pivot LU; SingularMap when |det h| < 1e-12.
inline double log_abs_det(const Matrix& h) {
  if (h.rows() != h.cols() || h.rows() == 0)
    throw Error(ErrorKind::ShapeMismatch, "disentanglement_trainer", "map must be square and non-empty");
  Eigen::PartialPivLU<Matrix> lu(h);
  const auto diag = lu.matrixLU().diagonal();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    const double a = std::abs(diag(i));
    if (a == 0.0 || !std::isfinite(a))
      throw Error(ErrorKind::SingularMap, "disentanglement_trainer",
                  "pivot " + std::to_string(i) + " is " + std::to_string(diag(i)));
    acc += std::log(a);
  }
  if (acc < std::log(kMinAbsDet))
    throw Error(ErrorKind::SingularMap, "disentanglement_trainer",
                "ln|det| = " + std::to_string(acc) + " below ln(1e-12)");
  return acc;
}

namespace detail {

// ln(1 - tanh(u)^2) = -2 ln cosh(u), evaluated without underflow.
inline double log_sech2(double u) {
  const double a = std::abs(u);
  return -2.0 * (a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0));
}

inline void check_square(const Matrix& h, Eigen::Index dims, const char* what) {
  if (h.rows() != h.cols() || h.rows() != dims)
    throw Error(ErrorKind::ShapeMismatch, "disentanglement_trainer",
                std::string(what) + " is " + std::to_string(h.rows()) + "x" + std::to_string(h.cols()) +
                    ", data has " + std::to_string(dims) + " dims");
}

}  // namespace detail

/// (1/(nD)) Σ_i Σ_d ln(1 − tanh(h_dᵀ z_i)²); always <= 0.
inline double entropy_term(const Matrix& h, const RowMatrix& z_batch) {
  detail::check_square(h, z_batch.cols(), "map");
  if (z_batch.rows() < 1)
    throw Error(ErrorKind::InvalidArgument, "disentanglement_trainer", "empty batch");
  const RowMatrix u = z_batch * h;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < u.rows(); ++i)
    for (Eigen::Index d = 0; d < u.cols(); ++d) acc += detail::log_sech2(u(i, d));
  return acc / static_cast<double>(u.rows() * u.cols());
}

inline double entropy_term(const Matrix& h, const EmbeddingMatrix& z) { return entropy_term(h, z.data()); }

/// ln|det h| + mu * entropy; maximised by Infomax.
inline double infomax_loss(const Matrix& h, const RowMatrix& z_batch, double mu) {
  return log_abs_det(h) + mu * entropy_term(h, z_batch);
}

inline double infomax_loss(const Matrix& h, const EmbeddingMatrix& z, double mu) {
  return infomax_loss(h, z.data(), mu);
}

namespace detail {

inline Matrix reg_residual(const Matrix& h_s, const Matrix& h_e, RegVariant variant, bool exemplar_side) {
  const Matrix id = Matrix::Identity(h_s.rows(), h_s.cols());
  switch (variant) {
    case RegVariant::cross: return h_e * h_s.transpose() - id;
    case RegVariant::hshe: return h_s.transpose() * h_e - id;
    case RegVariant::self_orth: {
      const Matrix& h = exemplar_side ? h_e : h_s;
      return h * h.transpose() - id;
    }
  }
  return id;
}

}  // namespace detail

/// cross: ‖H_E H_Sᵀ − I‖_F; self_orth: ½(‖H_E H_Eᵀ − I‖_F + ‖H_S H_Sᵀ − I‖_F);
/// hshe: ‖H_Sᵀ H_E − I‖_F. All unsquared.
inline double regularizer(const Matrix& h_s, const Matrix& h_e, RegVariant variant) {
  if (h_s.rows() != h_s.cols() || h_s.rows() != h_e.rows() || h_s.cols() != h_e.cols())
    throw Error(ErrorKind::ShapeMismatch, "disentanglement_trainer", "maps must be square and the same shape");
  if (variant == RegVariant::self_orth)
    return 0.5 * (detail::reg_residual(h_s, h_e, variant, true).norm() +
                  detail::reg_residual(h_s, h_e, variant, false).norm());
  return detail::reg_residual(h_s, h_e, variant, false).norm();
}

struct ObjectiveBreakdown {
  double objective = 0.0;  // minimised
  double infomax_s = 0.0;
  double infomax_e = 0.0;
  double reg = 0.0;
  double logdet_s = 0.0;
  double logdet_e = 0.0;
  double entropy_s = 0.0;
  double entropy_e = 0.0;
};

/// −IM(H_S; Z_S) − IM(H_E; Z_E) + λ·Reg(H_S, H_E).
inline ObjectiveBreakdown total_objective(const Matrix& h_s, const Matrix& h_e, const RowMatrix& z_s,
                                          const RowMatrix& z_e, const TrainConfig& cfg) {
  ObjectiveBreakdown b;
  b.logdet_s = log_abs_det(h_s);
  b.logdet_e = log_abs_det(h_e);
  b.entropy_s = entropy_term(h_s, z_s);
  b.entropy_e = entropy_term(h_e, z_e);
  b.infomax_s = b.logdet_s + cfg.mu * b.entropy_s;
  b.infomax_e = b.logdet_e + cfg.mu * b.entropy_e;
  b.reg = regularizer(h_s, h_e, cfg.reg_variant);
  b.objective = -b.infomax_s - b.infomax_e + cfg.lambda * b.reg;
  return b;
}

inline ObjectiveBreakdown total_objective(const LinearMapPair& pair, const EmbeddingMatrix& z_s,
                                          const EmbeddingMatrix& z_e, const TrainConfig& cfg) {
  return total_objective(pair.h_s, pair.h_e, z_s.data(), z_e.data(), cfg);
}

struct MapGradients {
  Matrix h_s;
  Matrix h_e;
};

/// Gradient of −IM(h; z) with respect to h:
///   −h^{-T} + mu * (2/(nD)) zᵀ tanh(z h).
inline Matrix neg_infomax_gradient(const Matrix& h, const RowMatrix& z_batch, double mu) {
  detail::check_square(h, z_batch.cols(), "map");
  log_abs_det(h);  // singularity check
  const Matrix inv_t = h.partialPivLu().inverse().transpose();
  const RowMatrix act = (z_batch * h).array().tanh().matrix();
  const double scale = 2.0 * mu / static_cast<double>(z_batch.rows() * z_batch.cols());
  return -inv_t + scale * (z_batch.transpose() * act);
}

/// Gradient of the unsquared regularizer; subgradient 0 where the residual vanishes.
inline MapGradients regularizer_gradient(const Matrix& h_s, const Matrix& h_e, RegVariant variant) {
  const Eigen::Index d = h_s.rows();
  MapGradients g{Matrix::Zero(d, d), Matrix::Zero(d, d)};
  switch (variant) {
    case RegVariant::cross: {
      const Matrix m = detail::reg_residual(h_s, h_e, variant, false);
      const double n = m.norm();
      if (n > 0.0) {
        g.h_s = m.transpose() * h_e / n;
        g.h_e = m * h_s / n;
      }
      break;
    }
    case RegVariant::hshe: {
      const Matrix m = detail::reg_residual(h_s, h_e, variant, false);
      const double n = m.norm();
      if (n > 0.0) {
        g.h_s = h_e * m.transpose() / n;
        g.h_e = h_s * m / n;
      }
      break;
    }
    case RegVariant::self_orth: {
      const Matrix ms = detail::reg_residual(h_s, h_e, variant, false);
      const Matrix me = detail::reg_residual(h_s, h_e, variant, true);
      const double ns = ms.norm();
      const double ne = me.norm();
      if (ns > 0.0) g.h_s = ms * h_s / ns;
      if (ne > 0.0) g.h_e = me * h_e / ne;
      break;
    }
  }
  return g;
}

inline MapGradients analytic_gradient(const Matrix& h_s, const Matrix& h_e, const RowMatrix& z_s,
                                      const RowMatrix& z_e, const TrainConfig& cfg) {
  MapGradients g{neg_infomax_gradient(h_s, z_s, cfg.mu), neg_infomax_gradient(h_e, z_e, cfg.mu)};
  if (cfg.lambda > 0.0) {
    const MapGradients r = regularizer_gradient(h_s, h_e, cfg.reg_variant);
    g.h_s += cfg.lambda * r.h_s;
    g.h_e += cfg.lambda * r.h_e;
  }
  return g;
}

inline MapGradients analytic_gradient(const LinearMapPair& pair, const EmbeddingMatrix& z_s,
                                      const EmbeddingMatrix& z_e, const TrainConfig& cfg) {
  return analytic_gradient(pair.h_s, pair.h_e, z_s.data(), z_e.data(), cfg);
}

namespace detail {

inline void adam_update(Matrix& param, Matrix& m, Matrix& v, const Matrix& grad, std::uint64_t step,
                        const TrainConfig& cfg) {
  m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * grad;
  v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
  param.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.adam_eps);
}

inline void adam_step_in_place(LinearMapPair& pair, const MapGradients& grads, const TrainConfig& cfg) {
  const std::uint64_t t = ++pair.adam.step;
  adam_update(pair.h_s, pair.adam.m_s, pair.adam.v_s, grads.h_s, t, cfg);
  adam_update(pair.h_e, pair.adam.m_e, pair.adam.v_e, grads.h_e, t, cfg);
}

}  // namespace detail

/// Bias-corrected Adam applied entrywise to both maps; one step per call.
inline LinearMapPair adam_step(LinearMapPair pair, const MapGradients& grads, const TrainConfig& cfg) {
  detail::adam_step_in_place(pair, grads, cfg);
  return pair;
}

/// Training stopped early because a map became singular; `partial` holds the
/// maps and history up to the failing check.
class TrainingAborted : public Error {
 public:
  TrainingAborted(const std::string& detail, LinearMapPair partial)
      : Error(ErrorKind::SingularMap, "disentanglement_trainer", detail), partial_(std::move(partial)) {}
  const LinearMapPair& partial() const noexcept { return partial_; }

 private:
  LinearMapPair partial_;
};

using EpochObserver = std::function<void(std::size_t epoch, const LinearMapPair&)>;

namespace detail {

inline EpochRecord make_record(std::size_t epoch, const LinearMapPair& pair, const RowMatrix& z_s,
                               const RowMatrix& z_e, const TrainConfig& cfg) {
  const ObjectiveBreakdown b = total_objective(pair.h_s, pair.h_e, z_s, z_e, cfg);
  return {epoch, b.objective, b.infomax_s, b.infomax_e, b.reg, b.logdet_s, b.logdet_e};
}

inline std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Fisher-Yates with our own index draws so the order is library-independent.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

inline void gather_rows(const RowMatrix& src, const std::vector<std::size_t>& perm, std::size_t begin,
                        std::size_t count, RowMatrix& out) {
  out.resize(static_cast<Eigen::Index>(count), src.cols());
  for (std::size_t k = 0; k < count; ++k)
    out.row(static_cast<Eigen::Index>(k)) = src.row(static_cast<Eigen::Index>(perm[(begin + k) % perm.size()]));
}

}  // namespace detail

/// Joint Stage-II training. Each step draws an independent mini-batch per
/// domain (no pairing is used) and applies one Adam update to both maps from
/// the combined objective. Steps per epoch = ceil(max(N_S, N_E) / batch); the
/// smaller domain wraps around its own permutation. Invertibility is checked
/// after every epoch; history[0] is the initial state.
inline LinearMapPair train(const EmbeddingMatrix& z_s, const EmbeddingMatrix& z_e, const TrainConfig& cfg,
                           const EpochObserver& observer = {}) {
  cfg.validate();
  if (z_s.dims() != z_e.dims())
    throw Error(ErrorKind::ShapeMismatch, "disentanglement_trainer",
                "synthetic dims " + std::to_string(z_s.dims()) + " != exemplar dims " + std::to_string(z_e.dims()));
  const auto ns = static_cast<std::size_t>(z_s.rows());
  const auto ne = static_cast<std::size_t>(z_e.rows());
  if (cfg.batch_size > std::min(ns, ne))
    throw Error(ErrorKind::InvalidArgument, "disentanglement_trainer",
                "batch_size " + std::to_string(cfg.batch_size) + " exceeds domain size " +
                    std::to_string(std::min(ns, ne)));

  LinearMapPair pair = LinearMapPair::initialize(z_s.dims(), cfg.init);
  pair.history.push_back(detail::make_record(0, pair, z_s.data(), z_e.data(), cfg));
  if (observer) observer(0, pair);

  std::mt19937_64 rng(cfg.seed);
  const std::size_t n_max = std::max(ns, ne);
  const std::size_t steps = (n_max + cfg.batch_size - 1) / cfg.batch_size;
  RowMatrix batch_s, batch_e;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto perm_s = detail::shuffled(ns, rng);
    const auto perm_e = detail::shuffled(ne, rng);
    try {
      for (std::size_t s = 0; s < steps; ++s) {
        const std::size_t begin = s * cfg.batch_size;
        const std::size_t count = std::min(cfg.batch_size, n_max - begin);
        detail::gather_rows(z_s.data(), perm_s, begin, count, batch_s);
        detail::gather_rows(z_e.data(), perm_e, begin, count, batch_e);
        detail::adam_step_in_place(pair, analytic_gradient(pair.h_s, pair.h_e, batch_s, batch_e, cfg), cfg);
      }
      pair.history.push_back(detail::make_record(epoch, pair, z_s.data(), z_e.data(), cfg));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SingularMap) throw;
      throw TrainingAborted("epoch " + std::to_string(epoch) + ": " + e.what(), pair);
    }
    if (observer) observer(epoch, pair);
  }
  return pair;
}

struct SingleMapResult {
  Matrix h;
  std::vector<double> objective_history;  // −IM on the full data, epoch 0..E
};

/// One-domain Infomax (no regulariser, no second map), identity init.
inline SingleMapResult train_single_domain(const EmbeddingMatrix& z, const TrainConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(z.rows());
  if (cfg.batch_size > n)
    throw Error(ErrorKind::InvalidArgument, "disentanglement_trainer", "batch_size exceeds sample count");
  const Eigen::Index d = z.dims();
  SingleMapResult out{Matrix::Identity(d, d), {}};
  Matrix m = Matrix::Zero(d, d), v = Matrix::Zero(d, d);
  out.objective_history.push_back(-infomax_loss(out.h, z.data(), cfg.mu));
  std::mt19937_64 rng(cfg.seed);
  const std::size_t steps = (n + cfg.batch_size - 1) / cfg.batch_size;
  std::uint64_t t = 0;
  RowMatrix batch;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto perm = detail::shuffled(n, rng);
    for (std::size_t s = 0; s < steps; ++s) {
      const std::size_t begin = s * cfg.batch_size;
      detail::gather_rows(z.data(), perm, begin, std::min(cfg.batch_size, n - begin), batch);
      detail::adam_update(out.h, m, v, neg_infomax_gradient(out.h, batch, cfg.mu), ++t, cfg);
    }
    out.objective_history.push_back(-infomax_loss(out.h, z.data(), cfg.mu));
  }
  return out;
}

/// Row i of the output is hᵀ z_i (i.e. the data matrix times h).
inline EmbeddingMatrix transform(const Matrix& h, const EmbeddingMatrix& z) {
  if (h.rows() != z.dims())
    throw Error(ErrorKind::ShapeMismatch, "disentanglement_trainer",
                "map has " + std::to_string(h.rows()) + " rows, data has " + std::to_string(z.dims()) + " dims");
  return EmbeddingMatrix(RowMatrix(z.data() * h), z.tag(), z.ids());
}

inline Matrix pearson_correlation_matrix(const EmbeddingMatrix& z) {
  if (z.rows() < 2)
    throw Error(ErrorKind::InvalidArgument, "disentanglement_trainer", "need at least 2 rows");
  const RowMatrix c = z.data().rowwise() - z.data().colwise().mean();
  Matrix cov = c.transpose() * c;
  const Eigen::Index d = cov.rows();
  Vector inv_sd(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!(cov(i, i) > 0.0))
      throw Error(ErrorKind::ZeroVarianceDimension, "disentanglement_trainer",
                  "dimension " + std::to_string(i) + " has zero variance");
    inv_sd(i) = 1.0 / std::sqrt(cov(i, i));
  }
  Matrix r = inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = std::clamp(0.5 * (r(i, j) + r(j, i)), -1.0, 1.0);
      r(i, j) = r(j, i) = v;
    }
    r(i, i) = 1.0;
  }
  return r;
}

/// Mean absolute off-diagonal entry of a square matrix.
inline double mean_abs_off_diagonal(const Matrix& r) {
  const Eigen::Index d = r.rows();
  if (d < 2) return 0.0;
  return (r.cwiseAbs().sum() - r.diagonal().cwiseAbs().sum()) / static_cast<double>(d * (d - 1));
}

/// Normalised Amari index of P = W A, in [0, 1]; 0 iff P is a scaled
/// permutation. With `transform`, the learned unmixing is hᵀ.
inline double amari_distance(const Matrix& estimated_unmixing, const Matrix& true_mixing) {
  if (estimated_unmixing.cols() != true_mixing.rows() || estimated_unmixing.rows() != true_mixing.cols())
    throw Error(ErrorKind::ShapeMismatch, "disentanglement_trainer",
                "unmixing " + std::to_string(estimated_unmixing.rows()) + "x" +
                    std::to_string(estimated_unmixing.cols()) + " incompatible with mixing " +
                    std::to_string(true_mixing.rows()) + "x" + std::to_string(true_mixing.cols()));
  const Matrix p = (estimated_unmixing * true_mixing).cwiseAbs();
  const Eigen::Index n = p.rows();
  if (n < 2) return 0.0;
  double rows = 0.0, cols = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double rmax = p.row(i).maxCoeff();
    const double cmax = p.col(i).maxCoeff();
    if (rmax <= 0.0 || cmax <= 0.0)
      throw Error(ErrorKind::SingularMap, "disentanglement_trainer", "product has a zero row or column");
    rows += p.row(i).sum() / rmax - 1.0;
    cols += p.col(i).sum() / cmax - 1.0;
  }
  return (rows + cols) / (2.0 * static_cast<double>(n) * static_cast<double>(n - 1));
}

}  // namespace adalign
