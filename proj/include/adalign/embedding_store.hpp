#pragma once

#include <Eigen/Dense>

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "adalign/error.hpp"

namespace adalign {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class DomainTag { synthetic, exemplar, distractor, latent };

inline constexpr std::string_view to_string(DomainTag tag) {
  switch (tag) {
    case DomainTag::synthetic: return "synthetic";
    case DomainTag::exemplar: return "exemplar";
    case DomainTag::distractor: return "distractor";
    case DomainTag::latent: return "latent";
  }
  return "unknown";
}

/// N x D feature matrix held at 64-bit precision, with optional unique
/// per-row ids. Immutable once constructed; the constructor enforces the
/// invariants (finite values, D >= 1, |ids| == N and distinct).
///
/// N = 0 is accepted so that an empty distractor pool can be represented.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() : data_(0, 1) {}

  explicit EmbeddingMatrix(RowMatrix data, DomainTag tag = DomainTag::synthetic,
                           std::vector<std::string> ids = {})
      : data_(std::move(data)), ids_(std::move(ids)), tag_(tag) {
    validate();
  }

  Eigen::Index rows() const noexcept { return data_.rows(); }
  Eigen::Index dims() const noexcept { return data_.cols(); }
  const RowMatrix& data() const noexcept { return data_; }
  auto row(Eigen::Index i) const { return data_.row(i); }

  bool has_ids() const noexcept { return !ids_.empty(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  DomainTag tag() const noexcept { return tag_; }

  /// Id of row `i`, falling back to the decimal row index when no ids exist.
  std::string id_of(Eigen::Index i) const {
    return has_ids() ? ids_[static_cast<std::size_t>(i)] : std::to_string(i);
  }

  /// Same ids and tag, different values (e.g. after a transform).
  EmbeddingMatrix with_data(RowMatrix data) const {
    if (data.rows() != rows())
      throw Error(ErrorKind::ShapeMismatch, "embedding_store",
                  "replacement has " + std::to_string(data.rows()) + " rows, expected " +
                      std::to_string(rows()));
    return EmbeddingMatrix(std::move(data), tag_, ids_);
  }

  EmbeddingMatrix with_tag(DomainTag tag) const { return EmbeddingMatrix(data_, tag, ids_); }

 private:
  void validate() const {
    if (data_.cols() < 1)
      throw Error(ErrorKind::DimensionMismatch, "embedding_store", "dimensionality must be >= 1");
    for (Eigen::Index i = 0; i < data_.rows(); ++i)
      for (Eigen::Index j = 0; j < data_.cols(); ++j)
        if (!std::isfinite(data_(i, j)))
          throw Error(ErrorKind::NonFiniteValue, "embedding_store",
                      "row " + std::to_string(i) + " column " + std::to_string(j));
    if (ids_.empty()) return;
    if (static_cast<Eigen::Index>(ids_.size()) != data_.rows())
      throw Error(ErrorKind::DimensionMismatch, "embedding_store",
                  std::to_string(ids_.size()) + " ids for " + std::to_string(data_.rows()) + " rows");
    std::unordered_set<std::string_view> seen;
    for (std::size_t i = 0; i < ids_.size(); ++i)
      if (!seen.insert(ids_[i]).second)
        throw Error(ErrorKind::DimensionMismatch, "embedding_store",
                    "duplicate id '" + ids_[i] + "' at row " + std::to_string(i));
  }

  RowMatrix data_;
  std::vector<std::string> ids_;
  DomainTag tag_ = DomainTag::synthetic;
};

enum class Format { binary, csv };

inline Format format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? Format::csv : Format::binary;
}

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

inline std::uint32_t get_u32(std::string_view in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[offset + b])) << (8 * b);
  return v;
}

inline std::uint64_t get_u64(std::string_view in, std::size_t offset) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + b])) << (8 * b);
  return v;
}

inline void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }
inline float get_f32(std::string_view in, std::size_t offset) {
  return std::bit_cast<float>(get_u32(in, offset));
}
inline double get_f64(std::string_view in, std::size_t offset) {
  return std::bit_cast<double>(get_u64(in, offset));
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "embedding_store", "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "embedding_store", "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::IoError, "embedding_store", "short write to " + path.string());
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline float narrow_checked(double v, Eigen::Index row, Eigen::Index col) {
  const auto f = static_cast<float>(v);
  if (!std::isfinite(f))
    throw Error(ErrorKind::NonFiniteValue, "embedding_store",
                "row " + std::to_string(row) + " column " + std::to_string(col) +
                    " does not fit 32-bit storage");
  return f;
}

}  // namespace detail

inline constexpr std::string_view kEmbeddingMagic = "AD01";
inline constexpr std::size_t kEmbeddingHeaderBytes = 12;

/// AD01: "AD01", u32 N, u32 D, then N*D little-endian float32, row-major.
inline std::string encode_ad01(const EmbeddingMatrix& m) {
  std::string out;
  out.reserve(kEmbeddingHeaderBytes + static_cast<std::size_t>(m.rows() * m.dims()) * 4);
  out.append(kEmbeddingMagic);
  detail::put_u32(out, static_cast<std::uint32_t>(m.rows()));
  detail::put_u32(out, static_cast<std::uint32_t>(m.dims()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.dims(); ++j)
      detail::put_f32(out, detail::narrow_checked(m.data()(i, j), i, j));
  return out;
}

inline RowMatrix decode_ad01(std::string_view bytes) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != kEmbeddingMagic)
    throw Error(ErrorKind::BadMagic, "embedding_store", "byte offset 0: expected \"AD01\"");
  if (bytes.size() < kEmbeddingHeaderBytes)
    throw Error(ErrorKind::TruncatedFile, "embedding_store",
                "header ends at byte offset " + std::to_string(bytes.size()) + ", need 12");
  const std::uint64_t n = detail::get_u32(bytes, 4);
  const std::uint64_t d = detail::get_u32(bytes, 8);
  if (d == 0)
    throw Error(ErrorKind::DimensionMismatch, "embedding_store", "byte offset 8: D = 0");
  const std::uint64_t expected = kEmbeddingHeaderBytes + n * d * 4;
  if (bytes.size() < expected) {
    const std::uint64_t row_bytes = d * 4;
    const std::uint64_t complete = (bytes.size() - kEmbeddingHeaderBytes) / row_bytes;
    throw Error(ErrorKind::TruncatedFile, "embedding_store",
                "header declares " + std::to_string(n) + " rows but data ends at byte offset " +
                    std::to_string(bytes.size()) + " (row " + std::to_string(complete) +
                    " incomplete, expected " + std::to_string(expected) + " bytes)");
  }
  if (bytes.size() > expected)
    throw Error(ErrorKind::DimensionMismatch, "embedding_store",
                std::to_string(bytes.size() - expected) + " trailing bytes after byte offset " +
                    std::to_string(expected));
  RowMatrix data(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::size_t offset = kEmbeddingHeaderBytes;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.cols(); ++j, offset += 4) {
      const float v = detail::get_f32(bytes, offset);
      if (!std::isfinite(v))
        throw Error(ErrorKind::NonFiniteValue, "embedding_store",
                    "row " + std::to_string(i) + " at byte offset " + std::to_string(offset));
      data(i, j) = static_cast<double>(v);
    }
  }
  return data;
}

/// CSV: comma-separated decimals, one row per line, no header. Values are
/// parsed as float32 and widened, matching the binary path.
inline RowMatrix decode_csv(std::string_view text) {
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = detail::trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty()) {
      ++line_no;
      continue;
    }
    std::vector<double> values;
    while (true) {
      const auto comma = line.find(',');
      const std::string_view cell = detail::trim(line.substr(0, comma));
      float v = 0.0f;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
        throw Error(ErrorKind::InvalidArgument, "embedding_store",
                    "row " + std::to_string(rows.size()) + " column " + std::to_string(values.size()) +
                        ": cannot parse '" + std::string(cell) + "'");
      if (!std::isfinite(v))
        throw Error(ErrorKind::NonFiniteValue, "embedding_store",
                    "row " + std::to_string(rows.size()) + " column " + std::to_string(values.size()));
      values.push_back(static_cast<double>(v));
      if (comma == std::string_view::npos) break;
      line = line.substr(comma + 1);
    }
    if (!rows.empty() && values.size() != rows.front().size())
      throw Error(ErrorKind::DimensionMismatch, "embedding_store",
                  "row " + std::to_string(rows.size()) + " (line " + std::to_string(line_no + 1) + ") has " +
                      std::to_string(values.size()) + " values, expected " +
                      std::to_string(rows.front().size()));
    rows.push_back(std::move(values));
    ++line_no;
  }
  if (rows.empty())
    throw Error(ErrorKind::DimensionMismatch, "embedding_store", "CSV contains no rows");
  RowMatrix data(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return data;
}

inline std::string encode_csv(const EmbeddingMatrix& m) {
  std::string out;
  char buf[64];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.dims(); ++j) {
      if (j > 0) out.push_back(',');
      const float v = detail::narrow_checked(m.data()(i, j), i, j);
      const auto res = std::to_chars(buf, buf + sizeof(buf), v);
      out.append(buf, res.ptr);
    }
    out.push_back('\n');
  }
  return out;
}

inline std::filesystem::path ids_path_for(const std::filesystem::path& path) {
  auto p = path;
  p.replace_extension(".ids");
  return p;
}

inline std::vector<std::string> read_ids(const std::filesystem::path& path) {
  std::istringstream in(detail::read_file(path));
  std::vector<std::string> ids;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ids.push_back(line);
  }
  // A trailing empty line is a file terminator, not an id.
  while (!ids.empty() && ids.back().empty()) ids.pop_back();
  return ids;
}

/// Loads a matrix and, if present, its `.ids` sidecar.
inline EmbeddingMatrix load_embeddings(const std::filesystem::path& path, Format format,
                                       DomainTag tag = DomainTag::synthetic) {
  const std::string bytes = detail::read_file(path);
  RowMatrix data = format == Format::binary ? decode_ad01(bytes) : decode_csv(bytes);
  std::vector<std::string> ids;
  const auto sidecar = ids_path_for(path);
  if (std::filesystem::exists(sidecar)) ids = read_ids(sidecar);
  return EmbeddingMatrix(std::move(data), tag, std::move(ids));
}

inline EmbeddingMatrix load_embeddings(const std::filesystem::path& path,
                                       DomainTag tag = DomainTag::synthetic) {
  return load_embeddings(path, format_from_path(path), tag);
}

inline void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path, Format format) {
  const std::string bytes = format == Format::binary ? encode_ad01(m) : encode_csv(m);
  detail::write_file(path, bytes);
  const auto sidecar = ids_path_for(path);
  if (m.has_ids()) {
    std::string text;
    for (const auto& id : m.ids()) text.append(id).push_back('\n');
    detail::write_file(sidecar, text);
  } else if (std::filesystem::exists(sidecar)) {
    std::filesystem::remove(sidecar);
  }
}

inline void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  save_embeddings(m, path, format_from_path(path));
}

/// Subtracts the column mean. Returns the centred matrix and the mean.
inline std::pair<EmbeddingMatrix, Vector> center(const EmbeddingMatrix& m) {
  if (m.rows() == 0) return {m, Vector::Zero(m.dims())};
  const Vector mean = m.data().colwise().mean().transpose();
  RowMatrix out = m.data().rowwise() - mean.transpose();
  return {m.with_data(std::move(out)), mean};
}

inline constexpr double kZeroNorm = 1e-12;

inline EmbeddingMatrix l2_normalize_rows(const EmbeddingMatrix& m) {
  RowMatrix out = m.data();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    if (norm <= kZeroNorm)
      throw Error(ErrorKind::ZeroRow, "embedding_store", "row " + std::to_string(i) + " has zero norm");
    out.row(i) /= norm;
  }
  return m.with_data(std::move(out));
}

/// Symmetric (ZCA) whitening. Output rows are (x - mean) * transform.
struct Whitening {
  Vector mean;
  Matrix transform;
};

inline Whitening fit_whitening(const EmbeddingMatrix& m, double ridge = 1e-9) {
  if (m.rows() < 2)
    throw Error(ErrorKind::DimensionMismatch, "embedding_store", "whitening needs at least 2 rows");
  const Vector mean = m.data().colwise().mean().transpose();
  const RowMatrix c = m.data().rowwise() - mean.transpose();
  Matrix cov = (c.transpose() * c) / static_cast<double>(m.rows());
  cov.diagonal().array() += ridge * std::max(cov.trace() / static_cast<double>(cov.rows()), 1e-300);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  const Vector inv_sqrt = eig.eigenvalues().array().max(1e-300).rsqrt();
  return {mean, eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose()};
}

inline EmbeddingMatrix apply_whitening(const EmbeddingMatrix& m, const Whitening& w) {
  RowMatrix out = (m.data().rowwise() - w.mean.transpose()) * w.transform;
  return m.with_data(std::move(out));
}

}  // namespace adalign
