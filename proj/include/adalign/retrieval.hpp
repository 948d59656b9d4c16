#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "adalign/embedding_store.hpp"
#include "adalign/error.hpp"

namespace adalign {

template <class A, class B>
double cosine_similarity(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.size() != b.size())
    throw Error(ErrorKind::ShapeMismatch, "retrieval_eval",
                "vector sizes " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > kZeroNorm) || !(nb > kZeroNorm))
    throw Error(ErrorKind::ZeroRow, "retrieval_eval", "vector norm below 1e-12");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

namespace detail {

inline RowMatrix normalized_rows(const RowMatrix& x, const char* what) {
  RowMatrix out = x;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (!(n > kZeroNorm))
      throw Error(ErrorKind::ZeroRow, "retrieval_eval", std::string(what) + " row " + std::to_string(i) + " has zero norm");
    out.row(i) /= n;
  }
  return out;
}

// Descending score, ascending index on exact ties.
inline std::vector<std::size_t> rank_scores(const Vector& scores, std::size_t top) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(scores.size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto before = [&](std::size_t a, std::size_t b) {
    const double sa = scores(static_cast<Eigen::Index>(a));
    const double sb = scores(static_cast<Eigen::Index>(b));
    return sa > sb || (sa == sb && a < b);
  };
  top = std::min(top, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(top), idx.end(), before);
  idx.resize(top);
  return idx;
}

// 1-based position of `item` in the full ranking implied by `scores`.
inline std::size_t rank_of(const Vector& scores, std::size_t item) {
  const double s = scores(static_cast<Eigen::Index>(item));
  std::size_t ahead = 0;
  for (Eigen::Index j = 0; j < scores.size(); ++j) {
    const double t = scores(j);
    if (t > s || (t == s && static_cast<std::size_t>(j) < item)) ++ahead;
  }
  return ahead + 1;
}

}  // namespace detail

/// Pool indices by descending cosine similarity to `query`, truncated to `top`.
inline std::vector<std::size_t> retrieve(const Vector& query, const EmbeddingMatrix& pool, std::size_t top) {
  if (query.size() != pool.dims())
    throw Error(ErrorKind::ShapeMismatch, "retrieval_eval",
                "query dims " + std::to_string(query.size()) + " != pool dims " + std::to_string(pool.dims()));
  if (top > static_cast<std::size_t>(pool.rows()))
    throw Error(ErrorKind::InvalidArgument, "retrieval_eval", "top exceeds pool size");
  const double qn = query.norm();
  if (!(qn > kZeroNorm)) throw Error(ErrorKind::ZeroRow, "retrieval_eval", "query has zero norm");
  const Vector scores = detail::normalized_rows(pool.data(), "pool") * (query / qn);
  return detail::rank_scores(scores, top);
}

inline double recall_at_k(const std::vector<std::size_t>& ranked, const std::vector<std::size_t>& relevant,
                          std::size_t k) {
  if (relevant.empty()) throw Error(ErrorKind::EmptyRelevantSet, "retrieval_eval", "relevant set is empty");
  const std::size_t cut = std::min(k, ranked.size());
  std::size_t hits = 0;
  for (std::size_t r : relevant)
    if (std::find(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(cut), r) !=
        ranked.begin() + static_cast<std::ptrdiff_t>(cut))
      ++hits;
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

/// AP = (1/n_e) Σ_k P(k) Rel(k) over the whole ranked list.
inline double average_precision(const std::vector<std::size_t>& ranked, const std::vector<std::size_t>& relevant) {
  if (relevant.empty()) throw Error(ErrorKind::EmptyRelevantSet, "retrieval_eval", "relevant set is empty");
  std::vector<std::size_t> rel = relevant;
  std::sort(rel.begin(), rel.end());
  std::size_t hits = 0;
  double acc = 0.0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    if (std::binary_search(rel.begin(), rel.end(), ranked[k])) {
      ++hits;
      acc += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
  }
  return acc / static_cast<double>(rel.size());
}

// AP from the sorted 1-based ranks of the relevant items.
inline double average_precision_from_ranks(const std::vector<std::size_t>& sorted_ranks) {
  double acc = 0.0;
  for (std::size_t i = 0; i < sorted_ranks.size(); ++i)
    acc += static_cast<double>(i + 1) / static_cast<double>(sorted_ranks[i]);
  return acc / static_cast<double>(sorted_ranks.size());
}

struct RetrievalTask {
  EmbeddingMatrix queries;
  EmbeddingMatrix pool;
  std::map<std::size_t, std::vector<std::size_t>> relevance;  // query index -> pool indices
  std::vector<std::size_t> ks{1, 5, 10, 100};

  void validate() const {
    if (queries.dims() != pool.dims())
      throw Error(ErrorKind::ShapeMismatch, "retrieval_eval",
                  "query dims " + std::to_string(queries.dims()) + " != pool dims " + std::to_string(pool.dims()));
    if (pool.rows() < 1) throw Error(ErrorKind::InvalidArgument, "retrieval_eval", "pool is empty");
    if (ks.empty()) throw Error(ErrorKind::InvalidArgument, "retrieval_eval", "no cutoffs given");
    for (std::size_t k : ks)
      if (k < 1) throw Error(ErrorKind::InvalidArgument, "retrieval_eval", "cutoffs must be >= 1");
    for (const auto& [q, rel] : relevance) {
      if (q >= static_cast<std::size_t>(queries.rows()))
        throw Error(ErrorKind::InvalidArgument, "retrieval_eval", "query index " + std::to_string(q) + " out of range");
      if (rel.empty())
        throw Error(ErrorKind::EmptyRelevantSet, "retrieval_eval", "query " + queries.id_of(static_cast<Eigen::Index>(q)));
      for (std::size_t p : rel)
        if (p >= static_cast<std::size_t>(pool.rows()))
          throw Error(ErrorKind::InvalidArgument, "retrieval_eval",
                      "pool index " + std::to_string(p) + " out of range for query " + std::to_string(q));
    }
  }
};

struct QueryResult {
  std::string id;
  std::size_t best_rank = 0;
  double ap = 0.0;
};

struct MetricsReport {
  std::map<std::size_t, double> recall_at_k;
  double map_score = 0.0;
  std::vector<QueryResult> per_query;
  std::size_t pool_size = 0;
  std::size_t num_queries = 0;
  std::vector<std::size_t> ks;
};

/// Exhaustive cosine retrieval; the relevant ranks are counted directly, so
/// no full sort of the pool is needed. Queries without a relevance entry are skipped.
inline MetricsReport evaluate(const RetrievalTask& task) {
  task.validate();
  std::vector<std::size_t> ks = task.ks;
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

  const RowMatrix pool_n = detail::normalized_rows(task.pool.data(), "pool");
  MetricsReport rep;
  rep.pool_size = static_cast<std::size_t>(task.pool.rows());
  rep.ks = ks;
  for (std::size_t k : ks) rep.recall_at_k[k] = 0.0;

  for (const auto& [q, rel_raw] : task.relevance) {
    const auto qi = static_cast<Eigen::Index>(q);
    const Vector query = task.queries.row(qi).transpose();
    const double qn = query.norm();
    if (!(qn > kZeroNorm))
      throw Error(ErrorKind::ZeroRow, "retrieval_eval", "query row " + std::to_string(q) + " has zero norm");
    const Vector scores = pool_n * (query / qn);

    std::vector<std::size_t> rel = rel_raw;
    std::sort(rel.begin(), rel.end());
    rel.erase(std::unique(rel.begin(), rel.end()), rel.end());
    std::vector<std::size_t> ranks;
    ranks.reserve(rel.size());
    for (std::size_t p : rel) ranks.push_back(detail::rank_of(scores, p));
    std::sort(ranks.begin(), ranks.end());

    for (std::size_t k : ks) {
      const auto hits = static_cast<std::size_t>(std::upper_bound(ranks.begin(), ranks.end(), k) - ranks.begin());
      rep.recall_at_k[k] += static_cast<double>(hits) / static_cast<double>(ranks.size());
    }
    QueryResult qr{task.queries.id_of(qi), ranks.front(), average_precision_from_ranks(ranks)};
    rep.map_score += qr.ap;
    rep.per_query.push_back(std::move(qr));
  }
  rep.num_queries = rep.per_query.size();
  if (rep.num_queries > 0) {
    const double n = static_cast<double>(rep.num_queries);
    for (auto& [k, v] : rep.recall_at_k) v /= n;
    rep.map_score /= n;
  }
  return rep;
}

inline nlohmann::json report_to_json(const MetricsReport& rep) {
  nlohmann::json j;
  for (const auto& [k, v] : rep.recall_at_k) j["recall"]["R@" + std::to_string(k)] = v;
  j["mAP"] = rep.map_score;
  j["config"] = {{"pool_size", rep.pool_size},
                 {"num_queries", rep.num_queries},
                 {"ks", rep.ks},
                 {"similarity", "cosine"},
                 {"tie_break", "ascending pool index"},
                 {"self_match_excluded", false},
                 {"ap_cutoff_m", rep.pool_size}};
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& q : rep.per_query) rows.push_back({{"id", q.id}, {"best_rank", q.best_rank}, {"ap", q.ap}});
  j["per_query"] = std::move(rows);
  return j;
}

/// Lines of the form `query_id: pool_id pool_id ...`; blank lines and `#` comments ignored.
inline std::map<std::size_t, std::vector<std::size_t>> parse_relevance(std::string_view text,
                                                                      const EmbeddingMatrix& queries,
                                                                      const EmbeddingMatrix& pool) {
  auto index_of = [](const EmbeddingMatrix& m) {
    std::unordered_map<std::string, std::size_t> idx;
    for (Eigen::Index i = 0; i < m.rows(); ++i) idx.emplace(m.id_of(i), static_cast<std::size_t>(i));
    return idx;
  };
  const auto qidx = index_of(queries);
  const auto pidx = index_of(pool);
  std::map<std::size_t, std::vector<std::size_t>> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string_view line = detail::trim(text.substr(pos, end - pos));
    ++line_no;
    pos = end + 1;
    if (line.empty() || line.front() == '#') continue;
    const std::size_t colon = line.find(':');
    if (colon == std::string_view::npos)
      throw Error(ErrorKind::InvalidArgument, "retrieval_eval", "relevance line " + std::to_string(line_no) + " has no ':'");
    const std::string qid(detail::trim(line.substr(0, colon)));
    const auto qit = qidx.find(qid);
    if (qit == qidx.end())
      throw Error(ErrorKind::InvalidArgument, "retrieval_eval",
                  "relevance line " + std::to_string(line_no) + ": unknown query id '" + qid + "'");
    auto& rel = out[qit->second];
    std::istringstream ss{std::string(line.substr(colon + 1))};
    std::string pid;
    while (ss >> pid) {
      const auto pit = pidx.find(pid);
      if (pit == pidx.end())
        throw Error(ErrorKind::InvalidArgument, "retrieval_eval",
                    "relevance line " + std::to_string(line_no) + ": unknown pool id '" + pid + "'");
      rel.push_back(pit->second);
    }
    if (rel.empty())
      throw Error(ErrorKind::EmptyRelevantSet, "retrieval_eval", "relevance line " + std::to_string(line_no));
  }
  return out;
}

}  // namespace adalign
