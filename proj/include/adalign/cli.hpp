#pragma once

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "adalign/alignment.hpp"
#include "adalign/cca.hpp"
#include "adalign/disentangle.hpp"
#include "adalign/embedding_store.hpp"
#include "adalign/error.hpp"
#include "adalign/map_io.hpp"
#include "adalign/retrieval.hpp"
#include "adalign/synthetic.hpp"

namespace adalign::cli {

inline constexpr const char* kVersion = "0.1.0";

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

inline std::string file_digest(const std::filesystem::path& p) { return hex64(fnv1a64(detail::read_file(p))); }

namespace fs = std::filesystem;
using nlohmann::json;

/// Provenance record written next to every output.
class Manifest {
 public:
  explicit Manifest(std::string subcommand) : start_(std::chrono::steady_clock::now()) {
    j_["subcommand"] = std::move(subcommand);
    j_["version"] = kVersion;
    j_["flags"] = json::object();
    j_["seeds"] = json::object();
    j_["inputs"] = json::object();
    j_["outputs"] = json::object();
  }

  void record_flags(const CLI::App& app) {
    for (const CLI::Option* opt : app.get_options()) {
      const std::string name = opt->get_name(false, true);
      if (name.empty() || name == "--help" || name == "-h") continue;
      const auto& res = opt->results();
      if (!res.empty()) {
        std::string joined;
        for (std::size_t i = 0; i < res.size(); ++i) joined += (i ? "," : "") + res[i];
        j_["flags"][name] = joined;
      } else if (!opt->get_default_str().empty()) {
        j_["flags"][name] = opt->get_default_str();
      }
    }
  }

  void seed(const std::string& name, std::uint64_t v) { j_["seeds"][name] = v; }
  void input(const fs::path& p) { j_["inputs"][p.string()] = file_digest(p); }
  void output(const fs::path& p) {
    j_["outputs"][p.string()] = file_digest(p);
    outputs_.push_back(p);
  }
  json& extra() { return j_; }

  void write(const fs::path& path) {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    j_["duration_seconds"] = secs;
    detail::write_file(path, j_.dump(2) + "\n");
  }

 private:
  json j_;
  std::chrono::steady_clock::time_point start_;
  std::vector<fs::path> outputs_;
};

inline fs::path manifest_path_for(const fs::path& output) {
  fs::path p = output;
  p += ".manifest.json";
  return p;
}

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& rows, const char* what) {
  if (!rows.is_array() || rows.empty())
    throw Error(ErrorKind::InvalidArgument, "cli", std::string(what) + " is not a non-empty array of rows");
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(rows.at(0).size());
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = rows.at(static_cast<std::size_t>(i)).get<std::vector<double>>();
    if (static_cast<Eigen::Index>(r.size()) != d)
      throw Error(ErrorKind::DimensionMismatch, "cli", std::string(what) + " row " + std::to_string(i) + " is ragged");
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = r[static_cast<std::size_t>(j)];
  }
  return m;
}

struct Global {
  int threads = 0;
  bool deterministic = false;
  bool quiet = false;
};

// ---- gen -------------------------------------------------------------------

struct GenOpts {
  long n = 1000;
  long d = 16;
  long latent = 0;
  long distractors = 0;
  double noise = 0.1;
  double divergence = 0.35;
  double source_scale = 1.0;
  std::string dist = "laplace";
  double dof = 5.0;
  std::uint64_t seed = 0;
  std::string out;
};

inline void run_gen(const GenOpts& o, const CLI::App& sub, const Global& g, std::ostream& out) {
  TwoViewConfig cfg;
  cfg.n = o.n;
  cfg.feature_dims = o.d;
  cfg.latent_dims = o.latent > 0 ? o.latent : o.d;
  cfg.distractors = o.distractors;
  cfg.noise_scale = o.noise;
  cfg.divergence = o.divergence;
  cfg.dist.kind = o.dist == "uniform" ? SourceKind::uniform
                  : o.dist == "student_t" ? SourceKind::student_t
                                          : SourceKind::laplace;
  cfg.dist.scale = o.source_scale;
  cfg.dist.dof = o.dof;
  cfg.seed = o.seed;
  const TwoViewData data = make_two_view_data(cfg);
  const SyntheticDataset& ds = data.dataset;

  const fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cli", "cannot create " + dir.string() + ": " + ec.message());

  Manifest man("gen");
  man.record_flags(sub);
  man.seed("seed", o.seed);
  man.extra()["threads"] = g.threads;
  man.extra()["deterministic"] = g.deterministic;
  man.extra()["dataset"] = {{"n", o.n},
                            {"feature_dims", o.d},
                            {"latent_dims", cfg.latent_dims},
                            {"noise_scale", o.noise},
                            {"distribution", std::string(to_string(cfg.dist.kind))},
                            {"source_scale", o.source_scale},
                            {"domain_gap_model", "distinct per-view mixings E(I + divergence*G_v) plus Gaussian noise; "
                                                 "a stand-in, not a measured gap"},
                            {"divergence", o.divergence}};

  auto save = [&](const EmbeddingMatrix& m, const char* name) {
    const fs::path p = dir / name;
    save_embeddings(m, p, Format::binary);
    man.output(p);
    if (m.has_ids()) man.output(ids_path_for(p));
  };
  save(ds.view_s, "synthetic.ad01");
  save(ds.view_e, "exemplar.ad01");
  save(ds.sources, "sources.ad01");
  save(data.distractors, "distractors.ad01");

  json mix = {{"mixing_s", matrix_to_json(ds.mixing_s)}, {"mixing_e", matrix_to_json(ds.mixing_e)}};
  detail::write_file(dir / "mixing.json", mix.dump(2) + "\n");
  man.output(dir / "mixing.json");

  std::string rel;
  for (std::size_t i = 0; i < ds.pairing.size(); ++i)
    rel += ds.view_s.id_of(static_cast<Eigen::Index>(i)) + ": " +
           ds.view_e.id_of(static_cast<Eigen::Index>(ds.pairing[i])) + "\n";
  detail::write_file(dir / "relevance.txt", rel);
  man.output(dir / "relevance.txt");

  man.write(dir / "manifest.json");
  if (!g.quiet)
    out << "wrote " << o.n << " pairs (D=" << o.d << ", latent " << cfg.latent_dims << ") and "
        << o.distractors << " distractors to " << dir.string() << "\n";
}

// ---- train -----------------------------------------------------------------

struct TrainOpts {
  std::string synthetic, exemplar, out;
  double lambda = 0.1;
  double mu = 1.0;
  double lr = 1e-3;
  std::size_t epochs = 10;
  std::size_t batch = 0;  // 0: min(1024, N)
  std::string reg = "self";
  std::string init = "identity";
  std::uint64_t seed = 0;
  std::uint64_t init_seed = 0;
  bool whiten = false;
};

inline json history_to_json(const std::vector<EpochRecord>& h) {
  json arr = json::array();
  for (const auto& r : h)
    arr.push_back({{"epoch", r.epoch},
                   {"objective", r.objective},
                   {"infomax_s", r.infomax_s},
                   {"infomax_e", r.infomax_e},
                   {"reg", r.reg},
                   {"logdet_s", r.logdet_s},
                   {"logdet_e", r.logdet_e}});
  return arr;
}

inline void run_train(const TrainOpts& o, const CLI::App& sub, const Global& g, std::ostream& out) {
  const EmbeddingMatrix xs = load_embeddings(o.synthetic, DomainTag::synthetic);
  const EmbeddingMatrix xe = load_embeddings(o.exemplar, DomainTag::exemplar);
  if (xs.dims() != xe.dims())
    throw Error(ErrorKind::ShapeMismatch, "cli",
                "synthetic dims " + std::to_string(xs.dims()) + " != exemplar dims " + std::to_string(xe.dims()));

  TrainConfig cfg;
  cfg.lambda = o.lambda;
  cfg.mu = o.mu;
  cfg.learning_rate = o.lr;
  cfg.epochs = o.epochs;
  const auto n_min = static_cast<std::size_t>(std::min(xs.rows(), xe.rows()));
  cfg.batch_size = o.batch > 0 ? o.batch : std::min<std::size_t>(1024, n_min);
  cfg.reg_variant = o.reg == "cross" ? RegVariant::cross : o.reg == "hshe" ? RegVariant::hshe : RegVariant::self_orth;
  cfg.init.kind = o.init == "rand-same" ? InitKind::random_same
                  : o.init == "rand-diff" ? InitKind::random_diff
                                          : InitKind::identity;
  cfg.init.seed_s = derive_seed(o.init_seed, 0);
  cfg.init.seed_e = derive_seed(o.init_seed, 1);
  cfg.seed = o.seed;

  const Eigen::Index d = xs.dims();
  Matrix pre_s = Matrix::Identity(d, d), pre_e = Matrix::Identity(d, d);
  EmbeddingMatrix zs, ze;
  Vector mean_s, mean_e;
  if (o.whiten) {
    const Whitening ws = fit_whitening(xs), we = fit_whitening(xe);
    zs = apply_whitening(xs, ws);
    ze = apply_whitening(xe, we);
    pre_s = ws.transform;
    pre_e = we.transform;
    mean_s = ws.mean;
    mean_e = we.mean;
  } else {
    std::tie(zs, mean_s) = center(xs);
    std::tie(ze, mean_e) = center(xe);
  }

  const LinearMapPair pair = train(zs, ze, cfg);

  MapFile mf;
  mf.h_s = pre_s * pair.h_s;
  mf.h_e = pre_e * pair.h_e;
  mf.meta = {{"kind", "trained"},
             {"preprocess", o.whiten ? "whiten" : "center"},
             {"mean_s", to_std(mean_s)},
             {"mean_e", to_std(mean_e)},
             {"batch_sampling", "independent per domain"},
             {"config",
              {{"lambda", cfg.lambda},
               {"mu", cfg.mu},
               {"learning_rate", cfg.learning_rate},
               {"epochs", cfg.epochs},
               {"batch_size", cfg.batch_size},
               {"reg_variant", std::string(to_string(cfg.reg_variant))},
               {"init", std::string(to_string(cfg.init.kind))},
               {"init_seed", o.init_seed},
               {"seed", cfg.seed},
               {"adam_beta1", cfg.adam_beta1},
               {"adam_beta2", cfg.adam_beta2},
               {"adam_eps", cfg.adam_eps}}},
             {"history", history_to_json(pair.history)}};

  const fs::path outp(o.out);
  save_map_file(mf, outp);
  Manifest man("train");
  man.record_flags(sub);
  man.seed("seed", o.seed);
  man.seed("init_seed", o.init_seed);
  man.extra()["threads"] = g.threads;
  man.extra()["deterministic"] = g.deterministic;
  man.input(o.synthetic);
  man.input(o.exemplar);
  man.output(outp);
  man.write(manifest_path_for(outp));
  if (!g.quiet) {
    const auto& h = pair.history;
    out << "trained " << cfg.epochs << " epochs (batch " << cfg.batch_size << "): objective "
        << h.front().objective << " -> " << h.back().objective << "\n";
  }
}

// ---- cca -------------------------------------------------------------------

struct CcaOpts {
  std::string synthetic, exemplar, out;
  std::string pairs = "ground-truth";
  long k = 0;  // 0: D
  std::optional<double> eps;
};

inline void run_cca(const CcaOpts& o, const CLI::App& sub, const Global& g, std::ostream& out) {
  const EmbeddingMatrix xs = load_embeddings(o.synthetic, DomainTag::synthetic);
  const EmbeddingMatrix xe = load_embeddings(o.exemplar, DomainTag::exemplar);
  RowAlignment pairing;
  if (o.pairs == "pseudo") {
    pairing = pseudo_pair(xs, xe);
  } else {
    if (xs.rows() != xe.rows())
      throw Error(ErrorKind::ShapeMismatch, "cli",
                  "ground-truth pairing needs equal row counts, got " + std::to_string(xs.rows()) + " and " +
                      std::to_string(xe.rows()));
    pairing = RowAlignment::identity(static_cast<std::size_t>(xs.rows()));
  }
  const CovarianceBundle b = compute_covariances(xs, xe, pairing);
  const Eigen::Index k = o.k > 0 ? o.k : xs.dims();
  const CcaSolution sol = cca_fit(b, k, o.eps);

  MapFile mf;
  mf.h_s = pad_to_square(sol.h_s_star);
  mf.h_e = pad_to_square(sol.h_e_star);
  mf.meta = {{"kind", "cca"},
             {"pairs", o.pairs},
             {"k", k},
             {"eps", sol.regularization_eps},
             {"correlations", to_std(sol.correlations)},
             {"preprocess", "center"},
             {"mean_s", to_std(b.mean_s)},
             {"mean_e", to_std(b.mean_e)}};
  const fs::path outp(o.out);
  save_map_file(mf, outp);
  Manifest man("cca");
  man.record_flags(sub);
  man.input(o.synthetic);
  man.input(o.exemplar);
  man.output(outp);
  man.extra()["threads"] = g.threads;
  man.write(manifest_path_for(outp));
  if (!g.quiet) {
    out << "canonical correlations:";
    for (Eigen::Index i = 0; i < sol.correlations.size(); ++i) out << ' ' << sol.correlations(i);
    out << "\n";
  }
}

// ---- eval ------------------------------------------------------------------

struct EvalOpts {
  std::string queries, relevance, maps, report;
  std::vector<std::string> pool;
  std::vector<std::size_t> ks{1, 5, 10, 100};
};

// Several pool files are stacked in the order given; ids must stay unique.
inline EmbeddingMatrix load_pool(const std::vector<std::string>& files) {
  std::vector<EmbeddingMatrix> parts;
  Eigen::Index rows = 0;
  bool ids = true;
  for (const auto& f : files) {
    parts.push_back(load_embeddings(f, DomainTag::exemplar));
    if (parts.back().dims() != parts.front().dims())
      throw Error(ErrorKind::ShapeMismatch, "retrieval_eval",
                  f + " has " + std::to_string(parts.back().dims()) + " dims, expected " +
                      std::to_string(parts.front().dims()));
    rows += parts.back().rows();
    ids = ids && (parts.back().has_ids() || parts.back().rows() == 0);
  }
  if (parts.size() == 1) return parts.front();
  RowMatrix data(rows, parts.front().dims());
  std::vector<std::string> all_ids;
  Eigen::Index at = 0;
  for (const auto& m : parts) {
    data.middleRows(at, m.rows()) = m.data();
    for (Eigen::Index i = 0; i < m.rows(); ++i) all_ids.push_back(ids ? m.id_of(i) : std::to_string(at + i));
    at += m.rows();
  }
  return EmbeddingMatrix(std::move(data), DomainTag::exemplar, std::move(all_ids));
}

inline void run_eval(const EvalOpts& o, const CLI::App& sub, const Global& g, std::ostream& out) {
  EmbeddingMatrix q = load_embeddings(o.queries, DomainTag::synthetic);
  EmbeddingMatrix p = load_pool(o.pool);
  if (q.dims() != p.dims())
    throw Error(ErrorKind::ShapeMismatch, "retrieval_eval",
                "query dims " + std::to_string(q.dims()) + " != pool dims " + std::to_string(p.dims()));
  if (!o.maps.empty()) {
    const MapFile mf = load_map_file(o.maps);
    q = mf.apply(q, false);
    p = mf.apply(p, true);
  }
  RetrievalTask task{q, p, parse_relevance(detail::read_file(o.relevance), q, p), o.ks};
  const MetricsReport rep = evaluate(task);
  json j = report_to_json(rep);
  j["config"]["maps"] = o.maps.empty() ? json(nullptr) : json(o.maps);

  if (!o.report.empty()) {
    const fs::path rp(o.report);
    detail::write_file(rp, j.dump(2) + "\n");
    Manifest man("eval");
    man.record_flags(sub);
    man.input(o.queries);
    for (const auto& f : o.pool) man.input(f);
    man.input(o.relevance);
    if (!o.maps.empty()) man.input(o.maps);
    man.output(rp);
    man.extra()["threads"] = g.threads;
    man.write(manifest_path_for(rp));
  }
  if (!g.quiet) {
    for (const auto& [k, v] : rep.recall_at_k) out << "R@" << k << ' ' << v << "\n";
    out << "mAP " << rep.map_score << "\n";
  }
}

// ---- diag ------------------------------------------------------------------

struct DiagOpts {
  std::string synthetic, exemplar, input, maps, mixing, out;
  std::string side = "s";
};

inline void emit_json(const json& j, const DiagOpts& o, const CLI::App& sub, std::ostream& out,
                      const std::vector<std::string>& inputs) {
  out << j.dump(2) << "\n";
  if (o.out.empty()) return;
  const fs::path p(o.out);
  detail::write_file(p, j.dump(2) + "\n");
  Manifest man(std::string("diag ") + sub.get_name());
  man.record_flags(sub);
  for (const auto& in : inputs)
    if (!in.empty()) man.input(in);
  man.output(p);
  man.write(manifest_path_for(p));
}

inline std::pair<EmbeddingMatrix, EmbeddingMatrix> load_paired(const DiagOpts& o) {
  EmbeddingMatrix xs = load_embeddings(o.synthetic, DomainTag::synthetic);
  EmbeddingMatrix xe = load_embeddings(o.exemplar, DomainTag::exemplar);
  if (xs.rows() != xe.rows())
    throw Error(ErrorKind::ShapeMismatch, "cli",
                "paired diagnostics need equal row counts, got " + std::to_string(xs.rows()) + " and " +
                    std::to_string(xe.rows()));
  return {std::move(xs), std::move(xe)};
}

inline void run_diag_cov(const DiagOpts& o, const CLI::App& sub, std::ostream& out) {
  auto [xs, xe] = load_paired(o);
  if (!o.maps.empty()) {
    const MapFile mf = load_map_file(o.maps);
    xs = mf.apply(xs, false);
    xe = mf.apply(xe, true);
  }
  const CovarianceBundle b = compute_covariances(xs, xe, RowAlignment::identity(static_cast<std::size_t>(xs.rows())));
  emit_json({{"alignment_fnorm", alignment_fnorm(b)}, {"n_pairs", b.n_pairs}, {"dims", xs.dims()}}, o, sub, out,
            {o.synthetic, o.exemplar, o.maps});
}

inline void run_diag_corr(const DiagOpts& o, const CLI::App& sub, std::ostream& out) {
  EmbeddingMatrix x = load_embeddings(o.input);
  if (!o.maps.empty()) x = load_map_file(o.maps).apply(x, o.side == "e");
  const Matrix r = pearson_correlation_matrix(x);
  std::ostringstream csv;
  csv << std::setprecision(17);
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    for (Eigen::Index j = 0; j < r.cols(); ++j) csv << (j ? "," : "") << r(i, j);
    csv << "\n";
  }
  const double m = mean_abs_off_diagonal(r);
  if (!o.out.empty()) {
    const fs::path p(o.out);
    detail::write_file(p, csv.str());
    Manifest man("diag corr");
    man.record_flags(sub);
    man.input(o.input);
    if (!o.maps.empty()) man.input(o.maps);
    man.output(p);
    man.extra()["mean_abs_off_diagonal"] = m;
    man.write(manifest_path_for(p));
  } else {
    out << csv.str();
  }
  out << "mean_abs_off_diagonal " << std::setprecision(17) << m << "\n";
}

inline void run_diag_amari(const DiagOpts& o, const CLI::App& sub, std::ostream& out) {
  const MapFile mf = load_map_file(o.maps);
  json mix;
  try {
    mix = json::parse(detail::read_file(o.mixing));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, "cli", o.mixing + " is not valid JSON: " + e.what());
  }
  const bool exemplar = o.side == "e";
  const Matrix a = matrix_from_json(mix.at(exemplar ? "mixing_e" : "mixing_s"), "mixing");
  const Matrix& h = exemplar ? mf.h_e : mf.h_s;
  const double score = amari_distance(h.transpose(), a);
  emit_json({{"amari_distance", score}, {"side", o.side}}, o, sub, out, {o.maps, o.mixing});
}

inline void run_diag_trace(const DiagOpts& o, const CLI::App& sub, std::ostream& out) {
  const auto [xs, xe] = load_paired(o);
  const MapFile mf = load_map_file(o.maps);
  const CovarianceBundle b = compute_covariances(xs, xe, RowAlignment::identity(static_cast<std::size_t>(xs.rows())));
  const double t = trace_alignment(mf.h_s, mf.h_e, *b.sigma12);
  const double t0 = b.sigma12->trace();
  json j = {{"trace_mapped", t}, {"trace_sigma12", t0}, {"difference", t - t0}};
  std::ostringstream s;
  s << std::setprecision(17) << t << ' ' << t0;
  j["traces"] = s.str();
  emit_json(j, o, sub, out, {o.synthetic, o.exemplar, o.maps});
}

// ---- entry point -----------------------------------------------------------

/// Exit codes: 0 success, 1 usage, 2 data/validation, 3 numerical failure.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Cross-domain embedding alignment by dual-domain Infomax ICA", "adalign"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Global g;
  app.add_option("--threads", g.threads, "worker threads (0 = auto)")->check(CLI::NonNegativeNumber);
  app.add_flag("--deterministic", g.deterministic, "sequential reductions");
  app.add_flag("--quiet", g.quiet, "suppress progress output");

  GenOpts go;
  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic two-view dataset");
  gen->fallthrough();
  gen->add_option("--n", go.n, "paired samples")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--d", go.d, "feature dimensions")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--latent", go.latent, "latent dimensions (default: --d)")->check(CLI::PositiveNumber);
  gen->add_option("--distractors", go.distractors, "unpaired pool rows")->capture_default_str()->check(CLI::NonNegativeNumber);
  gen->add_option("--noise", go.noise, "Gaussian noise std")->capture_default_str()->check(CLI::NonNegativeNumber);
  gen->add_option("--divergence", go.divergence, "gap between the two view mixings")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  gen->add_option("--source-scale", go.source_scale, "source standard deviation")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  gen->add_option("--dist", go.dist, "source law")->capture_default_str()->check(CLI::IsMember({"laplace", "uniform", "student_t"}));
  gen->add_option("--dof", go.dof, "student_t degrees of freedom")->capture_default_str();
  gen->add_option("--seed", go.seed, "random seed")->capture_default_str();
  gen->add_option("--out", go.out, "output directory")->required();

  TrainOpts to;
  CLI::App* tr = app.add_subcommand("train", "train the two linear maps");
  tr->fallthrough();
  tr->add_option("--synthetic", to.synthetic, "synthetic-domain features")->required()->check(CLI::ExistingFile);
  tr->add_option("--exemplar", to.exemplar, "exemplar-domain features")->required()->check(CLI::ExistingFile);
  tr->add_option("--lambda", to.lambda, "regulariser weight")->capture_default_str()->check(CLI::NonNegativeNumber);
  tr->add_option("--mu", to.mu, "entropy weight")->capture_default_str()->check(CLI::PositiveNumber);
  tr->add_option("--lr", to.lr, "Adam learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  tr->add_option("--epochs", to.epochs, "epochs")->capture_default_str();
  tr->add_option("--batch", to.batch, "mini-batch size (default min(1024, N))")->check(CLI::PositiveNumber);
  tr->add_option("--reg", to.reg, "regulariser variant")->capture_default_str()->check(CLI::IsMember({"cross", "self", "hshe"}));
  tr->add_option("--init", to.init, "initialisation")
      ->capture_default_str()
      ->check(CLI::IsMember({"identity", "rand-same", "rand-diff"}));
  tr->add_option("--seed", to.seed, "shuffle seed")->capture_default_str();
  tr->add_option("--init-seed", to.init_seed, "seed for random initialisation")->capture_default_str();
  tr->add_flag("--whiten", to.whiten, "whiten each domain before training (default: centre only)");
  tr->add_option("--out", to.out, "map-pair file")->required();

  CcaOpts co;
  CLI::App* cc = app.add_subcommand("cca", "fit the paired CCA baseline");
  cc->fallthrough();
  cc->add_option("--synthetic", co.synthetic)->required()->check(CLI::ExistingFile);
  cc->add_option("--exemplar", co.exemplar)->required()->check(CLI::ExistingFile);
  cc->add_option("--pairs", co.pairs, "pairing source")->capture_default_str()->check(CLI::IsMember({"ground-truth", "pseudo"}));
  cc->add_option("--k", co.k, "number of directions (default D)")->check(CLI::PositiveNumber);
  cc->add_option("--eps", co.eps, "ridge added to both covariances")->check(CLI::NonNegativeNumber);
  cc->add_option("--out", co.out, "map-pair file")->required();

  EvalOpts eo;
  CLI::App* ev = app.add_subcommand("eval", "retrieval evaluation");
  ev->fallthrough();
  ev->add_option("--queries", eo.queries)->required()->check(CLI::ExistingFile);
  ev->add_option("--pool", eo.pool, "pool files, stacked in order")->required()->check(CLI::ExistingFile);
  ev->add_option("--relevance", eo.relevance)->required()->check(CLI::ExistingFile);
  ev->add_option("--maps", eo.maps, "map-pair file applied before retrieval")->check(CLI::ExistingFile);
  ev->add_option("--k", eo.ks, "cutoffs")->delimiter(',')->capture_default_str()->check(CLI::PositiveNumber);
  ev->add_option("--report", eo.report, "JSON report path");

  DiagOpts dopt;
  CLI::App* dg = app.add_subcommand("diag", "diagnostics");
  dg->fallthrough();
  dg->require_subcommand(1);
  CLI::App* d_cov = dg->add_subcommand("cov", "alignment F-norm of the standardised cross-covariance");
  CLI::App* d_corr = dg->add_subcommand("corr", "Pearson correlation matrix as CSV");
  CLI::App* d_amari = dg->add_subcommand("amari", "Amari distance of a learned map to a true mixing");
  CLI::App* d_trace = dg->add_subcommand("trace", "Tr(H_S^T S12 H_E) next to Tr(S12)");
  for (CLI::App* s : {d_cov, d_corr, d_amari, d_trace}) {
    s->fallthrough();
    s->add_option("--out", dopt.out, "output path");
  }
  for (CLI::App* s : {d_cov, d_trace}) {
    s->add_option("--synthetic", dopt.synthetic)->required()->check(CLI::ExistingFile);
    s->add_option("--exemplar", dopt.exemplar)->required()->check(CLI::ExistingFile);
  }
  d_cov->add_option("--maps", dopt.maps)->check(CLI::ExistingFile);
  d_trace->add_option("--maps", dopt.maps)->required()->check(CLI::ExistingFile);
  d_corr->add_option("--input", dopt.input)->required()->check(CLI::ExistingFile);
  d_corr->add_option("--maps", dopt.maps)->check(CLI::ExistingFile);
  d_amari->add_option("--maps", dopt.maps)->required()->check(CLI::ExistingFile);
  d_amari->add_option("--mixing", dopt.mixing, "mixing.json from gen")->required()->check(CLI::ExistingFile);
  for (CLI::App* s : {d_corr, d_amari})
    s->add_option("--side", dopt.side, "which map to use")->capture_default_str()->check(CLI::IsMember({"s", "e"}));

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 1;
  }

  if (g.deterministic) Eigen::setNbThreads(1);
  else if (g.threads > 0) Eigen::setNbThreads(g.threads);

  try {
    if (gen->parsed()) run_gen(go, *gen, g, out);
    else if (tr->parsed()) run_train(to, *tr, g, out);
    else if (cc->parsed()) run_cca(co, *cc, g, out);
    else if (ev->parsed()) run_eval(eo, *ev, g, out);
    else if (d_cov->parsed()) run_diag_cov(dopt, *d_cov, out);
    else if (d_corr->parsed()) run_diag_corr(dopt, *d_corr, out);
    else if (d_amari->parsed()) run_diag_amari(dopt, *d_amari, out);
    else if (d_trace->parsed()) run_diag_trace(dopt, *d_trace, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_numerical(e.kind()) ? 3 : 2;
  } catch (const json::exception& e) {
    err << "error: malformed JSON input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

inline int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args);
}

}  // namespace adalign::cli
