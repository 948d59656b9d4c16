#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <string>

#include "adalign/embedding_store.hpp"
#include "adalign/error.hpp"

namespace adalign {

/// "ADHP", u32 D, H_S then H_E as row-major little-endian f64, then a JSON
/// trailer. The trailer may carry "mean_s"/"mean_e": features are centred
/// with them before the maps are applied.
struct MapFile {
  Matrix h_s;
  Matrix h_e;
  nlohmann::json meta = nlohmann::json::object();

  Vector mean(bool exemplar_side) const {
    const char* key = exemplar_side ? "mean_e" : "mean_s";
    const Eigen::Index d = h_s.rows();
    if (!meta.contains(key)) return Vector::Zero(d);
    const auto v = meta.at(key).get<std::vector<double>>();
    if (static_cast<Eigen::Index>(v.size()) != d)
      throw Error(ErrorKind::DimensionMismatch, "map_io",
                  std::string(key) + " has " + std::to_string(v.size()) + " entries, maps are " + std::to_string(d));
    return Eigen::Map<const Vector>(v.data(), d);
  }

  /// (x − mean) · H for the chosen side.
  EmbeddingMatrix apply(const EmbeddingMatrix& x, bool exemplar_side) const {
    const Matrix& h = exemplar_side ? h_e : h_s;
    if (x.dims() != h.rows())
      throw Error(ErrorKind::ShapeMismatch, "map_io",
                  "features have " + std::to_string(x.dims()) + " dims, maps are " + std::to_string(h.rows()));
    const Vector mu = mean(exemplar_side);
    RowMatrix out = (x.data().rowwise() - mu.transpose()) * h;
    return EmbeddingMatrix(std::move(out), x.tag(), x.ids());
  }
};

inline constexpr std::string_view kMapMagic = "ADHP";

inline std::string encode_adhp(const MapFile& f) {
  const Eigen::Index d = f.h_s.rows();
  if (d < 1 || f.h_s.cols() != d || f.h_e.rows() != d || f.h_e.cols() != d)
    throw Error(ErrorKind::ShapeMismatch, "map_io", "maps must be square, non-empty and the same size");
  std::string out(kMapMagic);
  detail::put_u32(out, static_cast<std::uint32_t>(d));
  for (const Matrix* h : {&f.h_s, &f.h_e})
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) {
        if (!std::isfinite((*h)(i, j)))
          throw Error(ErrorKind::NonFiniteValue, "map_io", "entry (" + std::to_string(i) + ", " + std::to_string(j) + ")");
        detail::put_f64(out, (*h)(i, j));
      }
  out += f.meta.dump(2);
  out += '\n';
  return out;
}

inline MapFile decode_adhp(std::string_view bytes) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != kMapMagic)
    throw Error(ErrorKind::BadMagic, "map_io", "expected \"ADHP\" at byte offset 0");
  if (bytes.size() < 8) throw Error(ErrorKind::TruncatedFile, "map_io", "header ends at byte offset " + std::to_string(bytes.size()));
  const std::uint32_t d = detail::get_u32(bytes, 4);
  if (d == 0) throw Error(ErrorKind::DimensionMismatch, "map_io", "D = 0 at byte offset 4");
  const std::size_t need = 8 + 2 * static_cast<std::size_t>(d) * d * 8;
  if (bytes.size() < need)
    throw Error(ErrorKind::TruncatedFile, "map_io",
                "need " + std::to_string(need) + " bytes for D = " + std::to_string(d) + ", file ends at byte offset " +
                    std::to_string(bytes.size()));
  MapFile f;
  f.h_s.resize(d, d);
  f.h_e.resize(d, d);
  std::size_t off = 8;
  for (Matrix* h : {&f.h_s, &f.h_e})
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j, off += 8) {
        const double v = detail::get_f64(bytes, off);
        if (!std::isfinite(v))
          throw Error(ErrorKind::NonFiniteValue, "map_io", "non-finite entry at byte offset " + std::to_string(off));
        (*h)(i, j) = v;
      }
  const std::string_view trailer = detail::trim(bytes.substr(need));
  if (!trailer.empty()) {
    try {
      f.meta = nlohmann::json::parse(trailer);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::InvalidArgument, "map_io",
                  "trailer at byte offset " + std::to_string(need) + " is not valid JSON: " + e.what());
    }
  }
  return f;
}

inline MapFile load_map_file(const std::filesystem::path& path) { return decode_adhp(detail::read_file(path)); }

inline void save_map_file(const MapFile& f, const std::filesystem::path& path) {
  detail::write_file(path, encode_adhp(f));
}

}  // namespace adalign
