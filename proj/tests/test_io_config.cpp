#include "dislo/config.hpp"
#include "dislo/io.hpp"

#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace dislo;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "dislo_unit_io";
  fs::create_directories(dir);
  return dir / name;
}

ConfigError config_error(const std::string& text) {
  try {
    parse_config(text, "t.json");
  } catch (const ConfigError& e) {
    return e;
  }
  FAIL("expected a configuration error");
  return ConfigError("", 0, "", "");
}

}  // namespace

TEST_CASE("default configuration round trip") {
  std::string text = default_config_text();
  Config c = parse_config(text);
  CHECK(c.to_json().dump(2) + "\n" == text);
  CHECK(parse_config("{}").to_json().dump() == c.to_json().dump());
  CHECK(c.eps == 1e-3);
  CHECK(c.iquad().isApprox(Mat2::Identity() / (3.0 * kPi), 1e-14));
  CHECK(c.resolved_lattice().cutoff_K == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
}

TEST_CASE("configuration errors carry line and field") {
  ConfigError e = config_error("{\n  \"density\": {\n    \"lame_mu\": -1\n  }\n}\n");
  CHECK(e.line() == 3);
  CHECK(e.field() == "density.lame_mu");
  CHECK(std::string(e.what()).find("t.json:3") != std::string::npos);

  e = config_error("{\n  \"domain\": {\"lo\": [0, 0], \"hi\": [1, 1]},\n  \"regime\": {\"colour\": 1}\n}\n");
  CHECK(e.line() == 3);
  CHECK(e.field() == "regime.colour");

  e = config_error("{\n  \"measure\": {\n    \"eps\": 2.0\n  }\n}\n");
  CHECK(e.field() == "measure.eps");
  CHECK(e.line() == 3);

  e = config_error("{\n  \"density\": {\n    \"nu\": 0.3,\n  }\n}\n");
  CHECK(e.line() == 4);

  e = config_error("{\"regime\": {\"eps\": [1e-2, 1e-3]}}");
  CHECK(e.field().rfind("regime", 0) == 0);

  e = config_error(
      "{\n\"measure\": {\"kind\": \"atoms\",\n \"atoms\": [{\"position\": [2, 0.5], \"burgers\": [1, 0]}]}\n}");
  CHECK(e.field().rfind("measure.atoms", 0) == 0);

  e = config_error("{\"lattice\": {\"iquad\": [[1, 0], [0, -1]]}}");
  CHECK(e.field() == "lattice.iquad");
}

TEST_CASE("mesh text round trip") {
  Mesh m = annulus_mesh(Vec2(0.5, -0.25), 0.1, 1.0, 4, 12);
  fs::path p = scratch("m.mesh");
  write_mesh(p.string(), m);
  std::ifstream in(p);
  std::string first;
  std::getline(in, first);
  CHECK(first.rfind("v ", 0) == 0);
  Mesh r = read_mesh(p.string());
  REQUIRE(r.num_vertices() == m.num_vertices());
  REQUIRE(r.num_triangles() == m.num_triangles());
  for (std::size_t i = 0; i < m.num_vertices(); ++i) CHECK((r.vertices[i] - m.vertices[i]).norm() == 0.0);
  for (std::size_t t = 0; t < m.num_triangles(); ++t) CHECK(r.triangles[t] == m.triangles[t]);

  std::ofstream(scratch("bad.mesh")) << "v 0 0 0\nq 1 2 3\n";
  CHECK_THROWS_AS(read_mesh(scratch("bad.mesh").string()), Error);
}

TEST_CASE("matrix binary layout") {
  Mat2 a;
  a << 1.0, 2.0, 3.0, -0.5;
  std::vector<Mat2> q{a, Mat2::Identity()};
  fs::path p = scratch("q.bin");
  write_matrices(p.string(), q);
  CHECK(fs::file_size(p) == 64u);
  std::ifstream in(p, std::ios::binary);
  unsigned char bytes[64];
  in.read(reinterpret_cast<char*>(bytes), 64);
  // row-major, IEEE little-endian: 2.0 = 00 .. 00 40
  const unsigned char two[8] = {0, 0, 0, 0, 0, 0, 0, 0x40};
  CHECK(std::memcmp(bytes + 8, two, 8) == 0);
  const unsigned char three[8] = {0, 0, 0, 0, 0, 0, 0x08, 0x40};
  CHECK(std::memcmp(bytes + 16, three, 8) == 0);
  std::vector<Mat2> r = read_matrices(p.string());
  REQUIRE(r.size() == 2u);
  CHECK(r[0] == a);
  CHECK(r[1] == Mat2::Identity());

  std::ofstream(scratch("short.bin"), std::ios::binary).write(reinterpret_cast<const char*>(bytes), 40);
  CHECK_THROWS_AS(read_matrices(scratch("short.bin").string()), Error);
}

TEST_CASE("csv output") {
  fs::path p = scratch("t.csv");
  write_csv(p.string(), {"a", "b"}, {{0.1, 1.0 / 3.0}, {-2.5e-17, 4.0}});
  std::string text = read_text(p.string());
  std::istringstream s(text);
  std::string header, row1, row2;
  std::getline(s, header);
  std::getline(s, row1);
  std::getline(s, row2);
  CHECK(header == "a,b");
  double x = std::stod(row1.substr(row1.find(',') + 1));
  CHECK(x == 1.0 / 3.0);
  CHECK(std::stod(row2.substr(0, row2.find(','))) == -2.5e-17);
}

TEST_CASE("json keeps insertion order") {
  Json j;
  j["zeta"] = 1;
  j["alpha"] = 2;
  fs::path p = scratch("o.json");
  write_json(p.string(), j);
  std::string text = read_text(p.string());
  CHECK(text.find("zeta") < text.find("alpha"));
  CHECK(text.back() == '\n');
}
