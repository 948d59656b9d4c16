#include <gtest/gtest.h>

#include "adalign/map_io.hpp"
#include "adalign/synthetic.hpp"
#include "test_util.hpp"

using namespace adalign;

namespace {

MapFile sample_map() {
  MapFile f;
  f.h_s = make_random_mixing(3, 3, 1);
  f.h_e = make_random_mixing(3, 3, 2);
  f.meta = {{"kind", "trained"}, {"mean_s", {1.0, 2.0, 3.0}}, {"mean_e", {0.0, -1.0, 0.5}}};
  return f;
}

}  // namespace

TEST(Adhp, RoundTripIsExact) {
  const MapFile f = sample_map();
  const std::string bytes = encode_adhp(f);
  EXPECT_EQ(bytes.substr(0, 4), "ADHP");
  EXPECT_EQ(bytes.size(), 8 + 2 * 9 * 8 + f.meta.dump(2).size() + 1);
  const MapFile g = decode_adhp(bytes);
  EXPECT_EQ(g.h_s, f.h_s);
  EXPECT_EQ(g.h_e, f.h_e);
  EXPECT_EQ(g.meta, f.meta);
  EXPECT_EQ(encode_adhp(g), bytes);

  TempDir dir;
  save_map_file(f, dir.path / "m.adhp");
  EXPECT_EQ(detail::read_file(dir.path / "m.adhp"), bytes);
  EXPECT_EQ(load_map_file(dir.path / "m.adhp").h_s, f.h_s);
}

TEST(Adhp, ByteLayout) {
  MapFile f;
  f.h_s = Matrix::Identity(1, 1);
  f.h_e = Matrix::Constant(1, 1, -2.0);
  const std::string b = encode_adhp(f);
  EXPECT_EQ(static_cast<unsigned char>(b[4]), 1);
  EXPECT_EQ(b[5], 0);
  EXPECT_EQ(detail::get_f64(b, 8), 1.0);
  EXPECT_EQ(detail::get_f64(b, 16), -2.0);
  // row-major: entry (0, 1) precedes (1, 0)
  MapFile g;
  g.h_s.resize(2, 2);
  g.h_s << 1, 2, 3, 4;
  g.h_e = Matrix::Identity(2, 2);
  const std::string c = encode_adhp(g);
  EXPECT_EQ(detail::get_f64(c, 16), 2.0);
}

TEST(Adhp, ApplyCentresThenMaps) {
  const MapFile f = sample_map();
  RowMatrix x(2, 3);
  x << 1, 2, 3, 2, 2, 2;
  const EmbeddingMatrix y = f.apply(EmbeddingMatrix(x), false);
  EXPECT_LT(y.data().row(0).norm(), 1e-15);
  RowMatrix expect = (x.rowwise() - f.mean(true).transpose()) * f.h_e;
  EXPECT_EQ(f.apply(EmbeddingMatrix(x), true).data(), expect);
  try {
    f.apply(EmbeddingMatrix(RowMatrix::Zero(1, 2)), false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
  }
}

TEST(Adhp, DecodeErrors) {
  const std::string good = encode_adhp(sample_map());
  auto kind_of = [](const std::string& bytes) {
    try {
      decode_adhp(bytes);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::InvalidArgument;
  };
  EXPECT_EQ(kind_of("ADHX" + good.substr(4)), ErrorKind::BadMagic);
  EXPECT_EQ(kind_of(good.substr(0, 6)), ErrorKind::TruncatedFile);
  EXPECT_EQ(kind_of(good.substr(0, 100)), ErrorKind::TruncatedFile);
  std::string zero = good;
  zero[4] = zero[5] = zero[6] = zero[7] = 0;
  EXPECT_EQ(kind_of(zero), ErrorKind::DimensionMismatch);
  std::string nan = good;
  const std::uint64_t bits = 0x7ff8000000000000ull;
  for (int i = 0; i < 8; ++i) nan[8 + i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  EXPECT_EQ(kind_of(nan), ErrorKind::NonFiniteValue);
  EXPECT_THROW(decode_adhp(good.substr(0, 8 + 144) + "{not json"), Error);
  EXPECT_NO_THROW(decode_adhp(good.substr(0, 8 + 144)));

  MapFile bad = sample_map();
  bad.h_e = Matrix::Identity(2, 2);
  EXPECT_THROW(encode_adhp(bad), Error);
  bad = sample_map();
  bad.meta["mean_s"] = {1.0};
  EXPECT_THROW(bad.mean(false), Error);
}
