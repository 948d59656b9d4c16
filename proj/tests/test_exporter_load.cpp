// Loads files written by the Python exporter through the primary loader.
#include <cmath>
#include <iostream>
#include <sstream>

#include "adalign/embedding_store.hpp"

using namespace adalign;

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: test_exporter_load DIR\n";
    return 2;
  }
  const std::filesystem::path dir(argv[1]);
  int failures = 0;
  auto check = [&](bool ok, const std::string& what) {
    std::cout << (ok ? "ok   " : "FAIL ") << what << "\n";
    failures += ok ? 0 : 1;
  };
  try {
    const EmbeddingMatrix three = load_embeddings(dir / "three.ad01");
    check(three.rows() == 3 && three.dims() == 7, "three.ad01 shape 3x7");
    check(three.has_ids() && three.id_of(2) == "img/c.png", "three.ids sidecar");
    std::istringstream ref(detail::read_file(dir / "three.txt"));
    std::string line;
    bool exact = true;
    for (Eigen::Index i = 0; std::getline(ref, line); ++i) {
      std::istringstream cells(line);
      std::string cell;
      for (Eigen::Index j = 0; std::getline(cells, cell, ','); ++j)
        exact = exact && three.data()(i, j) == static_cast<double>(static_cast<float>(std::stod(cell)));
    }
    check(exact, "three.ad01 values equal float32 of the written values");
    const EmbeddingMatrix wide = load_embeddings(dir / "wide.ad01");
    check(wide.rows() == 20 && wide.dims() == 768 && !wide.has_ids(), "wide.ad01 shape 20x768");
    const EmbeddingMatrix empty = load_embeddings(dir / "empty.ad01");
    check(empty.rows() == 0 && empty.dims() == 768, "empty.ad01 has no rows");
    const std::string bytes = detail::read_file(dir / "three.ad01");
    check(encode_ad01(three) == bytes, "re-encoding reproduces the exported bytes");
  } catch (const std::exception& e) {
    std::cout << "FAIL " << e.what() << "\n";
    return 1;
  }
  return failures == 0 ? 0 : 1;
}
