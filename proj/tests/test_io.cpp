#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "floquet/io.hpp"

using namespace floquet;
using namespace floquet::io;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("floquet_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("number formatting keeps 12 significant digits") {
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1.0 / 3.0) == "0.333333333333");
  CHECK(format_number(-2.5e-12) == "-2.5e-12");
  CHECK(format_number(-0.0) == "0");
  CHECK(format_number(std::nan("")) == "nan");
  CHECK(format_number(-INFINITY) == "-inf");
}

TEST_CASE("CSV round trip reproduces values to the printed precision") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> mant(-1.0, 1.0);
  std::uniform_int_distribution<int> expo(-15, 15);
  CsvTable t({"label", "value_hartree", "count"});
  std::vector<double> values;
  for (int i = 0; i < 200; ++i) {
    const double x = mant(rng) * std::pow(10.0, expo(rng));
    values.push_back(x);
    t.add_row({std::string(i % 3 == 0 ? "a,b" : "plain \"q\""), x, static_cast<long long>(i)});
  }
  const auto dir = scratch_dir("csv");
  t.write(dir / "t.csv");
  const auto back = read_csv(dir / "t.csv");
  REQUIRE(back.rows.size() == values.size());
  CHECK(back.header == t.header());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double y = back.number(i, "value_hartree");
    CHECK(std::abs(y - values[i]) <= 5e-12 * std::abs(values[i]));
    CHECK(format_number(y) == format_number(values[i]));
    CHECK(back.rows[i][back.column("label")] == (i % 3 == 0 ? "a,b" : "plain \"q\""));
    CHECK(back.number(i, "count") == static_cast<double>(i));
  }
  CHECK_THROWS_AS(back.column("missing"), std::out_of_range);
  fs::remove_all(dir);
}

TEST_CASE("header-only CSV") {
  CsvTable t({"lambda_nm", "intensity_1e13Wcm2"});
  CHECK(t.str() == "lambda_nm,intensity_1e13Wcm2\n");
  const auto p = parse_csv(t.str());
  CHECK(p.rows.empty());
  CHECK(p.header.size() == 2);
  CHECK_THROWS(t.add_row({1.0}));
}

TEST_CASE("content key depends on model, grid and block count") {
  const auto m = load_molecule("h2plus");
  const auto morse = load_molecule("h2plus-morse");
  RadialGrid g;
  const auto k = content_key(m, g, 2);
  CHECK(k == content_key(load_molecule("h2plus"), g, 2));
  CHECK(k != content_key(morse, g, 2));
  CHECK(k != content_key(m, g, 4));
  auto g2 = g;
  g2.ecs_angle = 0.31;
  CHECK(k != content_key(m, g2, 2));
  CHECK(hex(k).size() == 16);

  const auto prov = provenance(m, g, 2);
  CHECK(prov.at("model") == "h2plus");
  CHECK(prov.at("content_key") == hex(k));
  CHECK(prov.at("grid").at("n_points") == 3001);
  CHECK(prov.contains("code_version"));
}

TEST_CASE("result cache") {
  const auto dir = scratch_dir("cache");
  const auto path = dir / "c.jsonl";
  {
    ResultCache c(path, 42);
    CHECK(c.enabled());
    CHECK_FALSE(c.lookup("x"));
    c.store("x", json{{"e", 1.5}});
    c.store("y", json::array({1, 2}));
    CHECK(c.lookup("x")->at("e") == 1.5);
  }
  {
    // Reload: entries persist; a different key sees none of them.
    ResultCache c(path, 42);
    CHECK(c.size() == 2);
    CHECK((*c.lookup("y"))[1] == 2);
    ResultCache other(path, 43);
    CHECK(other.size() == 0);
  }
  {
    // An interrupted write leaves a truncated last line, which is skipped.
    std::ofstream f(path, std::ios::app);
    f << "{\"key\":\"000000000000002a\",\"id\":\"z\",\"da";
  }
  ResultCache c(path, 42);
  CHECK(c.size() == 2);
  CHECK_FALSE(c.lookup("z"));

  ResultCache disabled;
  CHECK_FALSE(disabled.enabled());
  disabled.store("a", 1);
  CHECK_FALSE(disabled.lookup("a"));
  fs::remove_all(dir);
}

TEST_CASE("SVG plot") {
  SvgPlot p("Title & <test>", "x (nm)", "y");
  p.add_line({1, 2, 3}, {1, 4, 9}, "sq");
  p.add_line({1, 2, 3}, {2, NAN, 3}, "gap", true);
  p.add_points({1.5}, {2.0}, "pt");
  p.add_marker(2.0, 4.0, "EP(12,13)");
  const auto s = p.render();
  CHECK(s.rfind("<svg", 0) == 0);
  CHECK(s.find("</svg>") != std::string::npos);
  CHECK(s.find("Title &amp; &lt;test&gt;") != std::string::npos);
  CHECK(s.find("EP(12,13)") != std::string::npos);
  CHECK(s.find("nan") == std::string::npos);
  // An empty plot still renders a valid document.
  const auto e = SvgPlot("empty", "x", "y").render();
  CHECK(e.find("</svg>") != std::string::npos);
}
