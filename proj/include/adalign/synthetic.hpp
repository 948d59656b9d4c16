#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "adalign/embedding_store.hpp"
#include "adalign/error.hpp"

namespace adalign {

/// splitmix64 finaliser; derives independent stream seeds from one user seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

enum class SourceKind { laplace, uniform, student_t };

/// Non-Gaussian source law. `scale` is the standard deviation for every kind.
struct SourceDistribution {
  SourceKind kind = SourceKind::laplace;
  double scale = 1.0;
  double dof = 5.0;  // student_t only

  void validate() const {
    if (!(scale > 0.0) || !std::isfinite(scale))
      throw Error(ErrorKind::InvalidDistribution, "synthetic_generator",
                  "scale must be positive, got " + std::to_string(scale));
    if (kind == SourceKind::student_t && !(dof > 2.0))
      throw Error(ErrorKind::InvalidDistribution, "synthetic_generator",
                  "student_t needs dof > 2 for finite variance, got " + std::to_string(dof));
  }
};

inline std::string_view to_string(SourceKind k) {
  switch (k) {
    case SourceKind::laplace: return "laplace";
    case SourceKind::uniform: return "uniform";
    case SourceKind::student_t: return "student_t";
  }
  return "unknown";
}

namespace detail {

template <class Rng>
double draw_source(const SourceDistribution& dist, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  switch (dist.kind) {
    case SourceKind::laplace: {
      double u = 0.0;
      do u = unit(rng); while (u == 0.0);
      u -= 0.5;
      const double b = dist.scale / std::sqrt(2.0);
      return -b * (u < 0 ? -1.0 : 1.0) * std::log1p(-2.0 * std::abs(u));
    }
    case SourceKind::uniform:
      return dist.scale * std::sqrt(3.0) * (2.0 * unit(rng) - 1.0);
    case SourceKind::student_t: {
      std::student_t_distribution<double> t(dist.dof);
      return dist.scale * std::sqrt((dist.dof - 2.0) / dist.dof) * t(rng);
    }
  }
  return 0.0;
}

// Raises every singular value below `floor` to `floor`.
inline Matrix lift_singular_values(const Matrix& a, double floor) {
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.singularValues().minCoeff() >= floor) return a;
  const Vector s = svd.singularValues().cwiseMax(floor);
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

}  // namespace detail

inline EmbeddingMatrix sample_sources(Eigen::Index n, Eigen::Index d, const SourceDistribution& dist,
                                      std::uint64_t seed) {
  dist.validate();
  if (n < 1 || d < 1)
    throw Error(ErrorKind::InvalidArgument, "synthetic_generator", "need n >= 1 and d >= 1");
  std::mt19937_64 rng(seed);
  RowMatrix z(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) z(i, j) = detail::draw_source(dist, rng);
  return EmbeddingMatrix(std::move(z), DomainTag::latent);
}

/// Gaussian out_dims x in_dims matrix (entries N(0, 1/in_dims)) whose
/// singular values are lifted to at least `min_singular_value`.
inline Matrix make_random_mixing(Eigen::Index out_dims, Eigen::Index in_dims, std::uint64_t seed,
                                 double min_singular_value = 0.1) {
  if (in_dims < 1 || out_dims < in_dims)
    throw Error(ErrorKind::InvalidArgument, "synthetic_generator",
                "mixing must satisfy out_dims >= in_dims >= 1 (got " + std::to_string(out_dims) + "x" +
                    std::to_string(in_dims) + ")");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(in_dims)));
  Matrix a(out_dims, in_dims);
  for (Eigen::Index i = 0; i < out_dims; ++i)
    for (Eigen::Index j = 0; j < in_dims; ++j) a(i, j) = normal(rng);
  return detail::lift_singular_values(a, min_singular_value);
}

/// Mixings for the two views of one latent: A_v = E (I + divergence * G_v),
/// where E embeds the latent in the first `latent_dims` feature axes and G_v
/// is an independent Gaussian matrix per view with N(0, 1/latent_dims) entries.
/// divergence = 0 gives identical, axis-aligned views.
struct ViewMixings {
  Matrix mixing_s;
  Matrix mixing_e;
};

inline ViewMixings make_view_mixings(Eigen::Index feature_dims, Eigen::Index latent_dims, double divergence,
                                     std::uint64_t seed, double min_singular_value = 0.1) {
  if (latent_dims < 1 || feature_dims < latent_dims)
    throw Error(ErrorKind::InvalidArgument, "synthetic_generator",
                "need feature_dims >= latent_dims >= 1");
  if (!(divergence >= 0.0))
    throw Error(ErrorKind::InvalidArgument, "synthetic_generator", "divergence must be >= 0");
  const Matrix embed = Matrix::Identity(feature_dims, latent_dims);
  auto one_view = [&](std::uint64_t stream) {
    const Matrix g = make_random_mixing(latent_dims, latent_dims, derive_seed(seed, stream), 0.0);
    const Matrix a = embed * (Matrix::Identity(latent_dims, latent_dims) + divergence * g);
    return detail::lift_singular_values(a, min_singular_value);
  };
  return {one_view(0), one_view(1)};
}

struct SyntheticDataset {
  EmbeddingMatrix sources;
  EmbeddingMatrix view_s;
  EmbeddingMatrix view_e;
  Matrix mixing_s;
  Matrix mixing_e;
  double noise_scale = 0.0;
  std::vector<std::size_t> pairing;  // view_s row i <-> view_e row pairing[i]
  std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<std::string> make_ids(const char* prefix, Eigen::Index n) {
  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) ids.push_back(prefix + std::to_string(i));
  return ids;
}

template <class Rng>
void add_noise(RowMatrix& x, double scale, Rng& rng) {
  if (scale == 0.0) return;
  std::normal_distribution<double> normal(0.0, scale);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) += normal(rng);
}

}  // namespace detail

/// view = sources * mixingᵀ + N(0, noise_scale²) per entry; pairing is the identity.
inline SyntheticDataset generate_views(const EmbeddingMatrix& sources, const Matrix& mixing_s,
                                       const Matrix& mixing_e, double noise_scale, std::uint64_t seed) {
  if (mixing_s.cols() != sources.dims() || mixing_e.cols() != sources.dims())
    throw Error(ErrorKind::ShapeMismatch, "synthetic_generator",
                "mixing columns (" + std::to_string(mixing_s.cols()) + ", " + std::to_string(mixing_e.cols()) +
                    ") must equal source dims " + std::to_string(sources.dims()));
  if (!(noise_scale >= 0.0))
    throw Error(ErrorKind::InvalidArgument, "synthetic_generator", "noise_scale must be >= 0");
  std::mt19937_64 rng(seed);
  RowMatrix xs = sources.data() * mixing_s.transpose();
  RowMatrix xe = sources.data() * mixing_e.transpose();
  detail::add_noise(xs, noise_scale, rng);
  detail::add_noise(xe, noise_scale, rng);

  SyntheticDataset ds;
  ds.sources = sources;
  ds.view_s = EmbeddingMatrix(std::move(xs), DomainTag::synthetic, detail::make_ids("s", sources.rows()));
  ds.view_e = EmbeddingMatrix(std::move(xe), DomainTag::exemplar, detail::make_ids("e", sources.rows()));
  ds.mixing_s = mixing_s;
  ds.mixing_e = mixing_e;
  ds.noise_scale = noise_scale;
  ds.pairing.resize(static_cast<std::size_t>(sources.rows()));
  for (std::size_t i = 0; i < ds.pairing.size(); ++i) ds.pairing[i] = i;
  ds.seed = seed;
  return ds;
}

/// Fresh latents pushed through `mixing` (the exemplar mixing by default in
/// the pipeline), so distractors are hard negatives with no pairing.
inline EmbeddingMatrix generate_distractors(Eigen::Index m, Eigen::Index dims, const SourceDistribution& dist,
                                            const Matrix& mixing, std::uint64_t seed, double noise_scale = 0.0) {
  if (m < 0) throw Error(ErrorKind::InvalidArgument, "synthetic_generator", "m must be >= 0");
  if (mixing.rows() != dims)
    throw Error(ErrorKind::ShapeMismatch, "synthetic_generator",
                "mixing has " + std::to_string(mixing.rows()) + " rows, requested dims " + std::to_string(dims));
  if (m == 0) return EmbeddingMatrix(RowMatrix(0, dims), DomainTag::distractor);
  const EmbeddingMatrix latent = sample_sources(m, mixing.cols(), dist, derive_seed(seed, 0));
  RowMatrix x = latent.data() * mixing.transpose();
  std::mt19937_64 rng(derive_seed(seed, 1));
  detail::add_noise(x, noise_scale, rng);
  return EmbeddingMatrix(std::move(x), DomainTag::distractor, detail::make_ids("d", m));
}

/// Everything `gen` produces, from one seed.
struct TwoViewConfig {
  Eigen::Index n = 1000;
  Eigen::Index feature_dims = 16;
  Eigen::Index latent_dims = 16;
  Eigen::Index distractors = 0;
  double noise_scale = 0.1;
  double divergence = 0.35;
  double min_singular_value = 0.1;
  SourceDistribution dist{};
  std::uint64_t seed = 0;
};

struct TwoViewData {
  SyntheticDataset dataset;
  EmbeddingMatrix distractors;
};

inline TwoViewData make_two_view_data(const TwoViewConfig& cfg) {
  const ViewMixings mix =
      make_view_mixings(cfg.feature_dims, cfg.latent_dims, cfg.divergence, derive_seed(cfg.seed, 10),
                        cfg.min_singular_value);
  const EmbeddingMatrix z = sample_sources(cfg.n, cfg.latent_dims, cfg.dist, derive_seed(cfg.seed, 11));
  TwoViewData out{generate_views(z, mix.mixing_s, mix.mixing_e, cfg.noise_scale, derive_seed(cfg.seed, 12)),
                  {}};
  out.dataset.seed = cfg.seed;
  out.distractors = generate_distractors(cfg.distractors, cfg.feature_dims, cfg.dist, mix.mixing_e,
                                         derive_seed(cfg.seed, 13), cfg.noise_scale);
  return out;
}

}  // namespace adalign
