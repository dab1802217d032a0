#include <cmath>
#include <filesystem>
#include <string>

#include <doctest.h>
#include <json.hpp>

#include "messy/bench.hpp"
#include "messy/error.hpp"
#include "messy/io.hpp"
#include "messy/multilevel.hpp"

using namespace messy;

namespace {

std::size_t parse_error_line(const std::string& text) {
  try {
    (void)parse_csv(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("parse_csv: shapes") {
  const SampleSet a = parse_csv("0.1\n0.2\n");
  CHECK(a.size() == 2);
  CHECK(a.dim() == 1);
  CHECK(a(1, 0) == 0.2);
  const SampleSet b = parse_csv("1,2\n3,4\n");
  CHECK(b.size() == 2);
  CHECK(b.dim() == 2);
  CHECK(b(1, 1) == 4.0);
  CHECK(parse_csv("1,2\r\n3,4").size() == 2);
}

TEST_CASE("parse_csv: header and byte order mark") {
  const SampleSet s = parse_csv("\xEF\xBB\xBFx1,x2\n1,2\n3,4\n");
  CHECK(s.size() == 2);
  CHECK(s(0, 0) == 1.0);
}

TEST_CASE("parse_csv: errors carry the line") {
  CHECK(parse_error_line("1,2\n3\n") == 2);
  CHECK(parse_error_line("1\n2\nabc\n") == 3);
  CHECK(parse_error_line("1\ninf\n") == 2);
  CHECK(parse_error_line("") == 1);
  CHECK(parse_error_line("x,y\n") != 0);
}

TEST_CASE("read_csv: missing file") {
  CHECK_THROWS_AS(read_csv("/nonexistent/dir/none.csv"), IoError);
}

TEST_CASE("csv round trip") {
  const SampleSet s = gen_samples("gauss2d", 50, 1);
  const SampleSet back = parse_csv(format_csv(s.values()));
  CHECK(back.values() == s.values());
  const auto path = (std::filesystem::temp_directory_path() / "messy_io_test.csv").string();
  write_csv(path, s.values());
  CHECK(read_csv(path).values() == s.values());
  std::filesystem::remove(path);
}

TEST_CASE("density json round trip") {
  for (const char* id : {"bimodal", "exponential", "gauss2d"}) {
    const CaseInfo info = case_info(id);
    const SampleSet s = gen_samples(id, 3000, 2);
    MultilevelConfig cfg;
    cfg.bounded = info.bounded;
    cfg.bounds = info.bounds;
    MessyDensity d = fit_multilevel(s, polynomial_source(info.dim, info.default_nm), cfg).density;
    d.set_kl_score(1.25);
    const std::string text = density_to_json(d);
    const MessyDensity back = density_from_json(text);
    REQUIRE(back.levels().size() == d.levels().size());
    CHECK(back.kl_score() == 1.25);
    CHECK(back.dim() == d.dim());
    for (std::size_t k = 0; k < 20; ++k) {
      const Eigen::RowVectorXd row = s.row(k);
      CHECK(back.pdf(row.data()) == doctest::Approx(d.pdf(row.data())).epsilon(1e-12));
    }
    CHECK(density_to_json(back) == text);
    const auto j = nlohmann::json::parse(text);
    if (!info.bounded) CHECK(j["levels"][0]["support"][0][0].is_null());
  }
}

TEST_CASE("density json: malformed input") {
  CHECK_THROWS_AS(density_from_json("{"), ParseError);
  CHECK_THROWS_AS(density_from_json("{\"dim\": 1}"), ParseError);
  CHECK_THROWS_AS(density_from_json("[]"), ParseError);
}

}  // TEST_SUITE
