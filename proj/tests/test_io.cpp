#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "operon/container_io.hpp"
#include "test_helpers.hpp"

using namespace operon;
using namespace operon::testing;

TEST_CASE("containers round trip bitwise") {
  Rng rng(1);
  ArrayContainer box;
  box.add("a", random_matrix(rng, 3, 5));
  box.add("b", random_matrix(rng, 1, 1));
  box.metadata = {{"name", "fixture"}, {"seed", 7}};
  write_container("box1.bin", kDatasetMagic, box);

  const ArrayContainer loaded = read_container("box1.bin", kDatasetMagic);
  CHECK((loaded.get("a") - box.get("a")).cwiseAbs().maxCoeff() == 0.0);
  CHECK((loaded.get("b") - box.get("b")).cwiseAbs().maxCoeff() == 0.0);
  CHECK(loaded.metadata.at("seed").get<int>() == 7);
  CHECK_FALSE(loaded.has("missing"));
  CHECK_THROWS_AS(loaded.get("missing"), CorruptManifest);

  write_container("box2.bin", kDatasetMagic, loaded);
  CHECK(file_hash_hex("box1.bin") == file_hash_hex("box2.bin"));
  std::remove("box1.bin");
  std::remove("box2.bin");
}

TEST_CASE("wrong magic is rejected") {
  ArrayContainer box;
  box.add("a", Matrix::Ones(2, 2));
  write_container("magic.bin", kDatasetMagic, box);
  CHECK_THROWS_AS(read_container("magic.bin", kModelMagic), CorruptManifest);
  std::remove("magic.bin");
}

TEST_CASE("truncated payloads raise CorruptManifest with an offset") {
  Rng rng(2);
  ArrayContainer box;
  box.add("a", random_matrix(rng, 4, 4));
  write_container("trunc.bin", kDatasetMagic, box);

  std::ifstream in("trunc.bin", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  std::ofstream out("trunc.bin", std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 40));
  out.close();

  try {
    read_container("trunc.bin", kDatasetMagic);
    CHECK(false);
  } catch (const CorruptManifest& err) {
    CHECK(std::string(err.what()).find("offset") != std::string::npos);
  }
  std::remove("trunc.bin");
}

TEST_CASE("csv import matches a hand-written fixture exactly") {
  {
    std::ofstream out("fixture.csv");
    out << "1.5,-2.25\n0.125,3\n10,0.0001\n";
  }
  const Matrix m = read_csv_matrix("fixture.csv");
  REQUIRE(m.rows() == 3);
  REQUIRE(m.cols() == 2);
  CHECK(m(0, 0) == 1.5);
  CHECK(m(0, 1) == -2.25);
  CHECK(m(1, 0) == 0.125);
  CHECK(m(1, 1) == 3.0);
  CHECK(m(2, 0) == 10.0);
  CHECK(m(2, 1) == 0.0001);
  std::remove("fixture.csv");
}

TEST_CASE("csv write then read preserves values") {
  Rng rng(3);
  const Matrix m = random_matrix(rng, 5, 3);
  write_csv_matrix("round.csv", m);
  const Matrix back = read_csv_matrix("round.csv");
  CHECK((back - m).cwiseAbs().maxCoeff() == 0.0);  // 17 significant digits
  std::remove("round.csv");
}

TEST_CASE("ragged csv rows are rejected") {
  {
    std::ofstream out("ragged.csv");
    out << "1,2,3\n4,5\n";
  }
  CHECK_THROWS_AS(read_csv_matrix("ragged.csv"), ShapeMismatch);
  std::remove("ragged.csv");
}
