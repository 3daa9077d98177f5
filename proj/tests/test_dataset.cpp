#include <doctest.h>

#include "proxi2s/csv.hpp"
#include "proxi2s/dataset.hpp"
#include "proxi2s/error.hpp"

using namespace proxi2s;

namespace {

Dataset tiny() {
  Dataset d;
  d.a.resize(2);
  d.a << 1, 0;
  d.z.resize(2, 1);
  d.z << 2, 3;
  d.y.resize(2);
  d.y << 0, 1;
  d.w.resize(2);
  d.w << 1, 1;
  d.x.resize(2, 0);
  return d;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("design with products") {
  Dataset d = tiny();
  Matrix design = build_design(d, TermSpec::parse({"a", "z", "az"}));
  Matrix expected(2, 4);
  expected << 1, 1, 2, 2, 1, 0, 3, 0;
  CHECK((design - expected).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("empty term list gives the intercept only") {
  Dataset d = tiny();
  Matrix design = build_design(d, TermSpec{});
  REQUIRE(design.cols() == 1);
  CHECK(design.col(0).isOnes());
}

TEST_CASE("demo fixture column sums") {
  Dataset d = load_csv(std::string(PROXI2S_SOURCE_DIR) + "/data/demo.csv",
                       ColumnRoles{"y", "a", "w", {"z"}, {}, {}});
  REQUIRE(d.n() == 15);
  CHECK(d.y.sum() == 11.0);
  CHECK(d.a.sum() == 9.0);
  CHECK(d.z.sum() == 48.0);
  CHECK(d.w.sum() == 8.0);
  Matrix design = build_design(d, TermSpec::parse({"a", "z", "y"}));
  REQUIRE(design.rows() == 15);
  REQUIRE(design.cols() == 4);
  Vector sums = design.colwise().sum();
  CHECK(sums[0] == 15.0);
  CHECK(sums[1] == 9.0);
  CHECK(sums[2] == 48.0);
  CHECK(sums[3] == 11.0);
}

TEST_CASE("unknown and duplicate terms are rejected") {
  Dataset d = tiny();
  CHECK_THROWS_AS((void)TermSpec::parse({"q"}), DataError);
  CHECK_THROWS_AS((void)build_design(d, TermSpec::parse({"a", "a"})),
                  DataError);
  // order inside a product does not make a term distinct
  CHECK_THROWS_AS((void)build_design(d, TermSpec::parse({"az", "za"})),
                  DataError);
  CHECK_THROWS_AS((void)build_design(d, TermSpec::parse({"u"})), DataError);
}

TEST_CASE("overrides fix a column before products") {
  Dataset d = tiny();
  Matrix design =
      build_design(d, TermSpec::parse({"a", "ay"}), {{Var::Y, 1.0}});
  CHECK(design(0, 2) == 1.0);  // a=1, y overridden to 1
  CHECK(design(1, 2) == 0.0);  // a=0
}

TEST_CASE("multi-column blocks expand in order") {
  Dataset d = tiny();
  d.z.resize(2, 2);
  d.z << 2, 5, 3, 7;
  Matrix design = build_design(d, TermSpec::parse({"z", "az"}));
  REQUIRE(design.cols() == 5);
  CHECK(design(0, 1) == 2.0);
  CHECK(design(0, 2) == 5.0);
  CHECK(design(0, 3) == 2.0);  // a*z1 with a=1
  CHECK(design(1, 4) == 0.0);  // a*z2 with a=0
  auto names = design_names(d, TermSpec::parse({"z", "az"}));
  CHECK(names[1] == "z1");
  CHECK(names[4] == "a:z2");
}

TEST_CASE("validate rejects length mismatch and non-finite values") {
  Dataset d = tiny();
  d.w.resize(3);
  CHECK_THROWS_AS(d.validate(), DataError);
  d = tiny();
  d.a[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(d.validate(), DataError);
}

TEST_CASE("subset copies the selected rows") {
  Dataset d = tiny();
  Dataset s = d.subset({1, 1, 0});
  REQUIRE(s.n() == 3);
  CHECK(s.a[0] == 0.0);
  CHECK(s.a[2] == 1.0);
  CHECK(s.z(0, 0) == 3.0);
}

}  // TEST_SUITE
