#include <doctest.h>

#include <map>
#include <vector>

#include "ppgl/gapp.hpp"
#include "ppgl/rng.hpp"

using namespace ppgl;

namespace {

// Independent hand-applied rubric table, kept deliberately separate from the
// engine's band logic.
int hand_total(HistologicPattern pattern, double cellularity, bool necrosis, bool invasion,
               double ki67, CatecholamineType catechol) {
  int total = 0;
  if (pattern == HistologicPattern::LargeIrregularNests) total += 1;
  if (pattern == HistologicPattern::Pseudorosette) total += 2;
  if (cellularity >= 250.0)
    total += 2;
  else if (cellularity >= 150.0)
    total += 1;
  if (necrosis) total += 2;
  if (invasion) total += 1;
  if (ki67 >= 3.0)
    total += 2;
  else if (ki67 >= 1.0)
    total += 1;
  if (catechol == CatecholamineType::NorepinephrineType) total += 1;
  return total;
}

GappComponents make(HistologicPattern p, double cell, bool nec, bool inv, double ki,
                    CatecholamineType cat) {
  return GappComponents{p, cell, nec, inv, ki, cat};
}

const std::vector<double> kCellReps{100.0, 200.0, 300.0};
const std::vector<double> kKiReps{0.5, 2.0, 5.0};

}  // namespace

TEST_CASE("all minimal findings score zero, well differentiated") {
  const auto s = score_components(make(HistologicPattern::Zellballen, 100.0, false, false, 0.5,
                                       CatecholamineType::EpinephrineType),
                                  default_rubric());
  CHECK(s.total == 0);
  CHECK(s.grade == GappGrade::WellDifferentiated);
}

TEST_CASE("maximal findings reach the rubric maximum of 10") {
  const auto s = score_components(make(HistologicPattern::Pseudorosette, 300.0, true, true, 5.0,
                                       CatecholamineType::NorepinephrineType),
                                  default_rubric());
  CHECK(s.total == 10);
  CHECK(s.total == default_rubric().max_total);
  CHECK(s.grade == GappGrade::PoorlyDifferentiated);
}

TEST_CASE("values exactly on a break belong to the higher band") {
  const GappRubric r = default_rubric();
  auto base = make(HistologicPattern::Zellballen, 150.0, false, false, 0.0,
                   CatecholamineType::EpinephrineType);
  CHECK(score_components(base, r).cellularity_points == 1);
  base.cellularity_cells_per_unit = 250.0;
  CHECK(score_components(base, r).cellularity_points == 2);
  base.ki67_percent = 1.0;
  CHECK(score_components(base, r).ki67_points == 1);
  base.ki67_percent = 3.0;
  CHECK(score_components(base, r).ki67_points == 2);
}

TEST_CASE("engine totals match the hand rubric on the full cross-product") {
  const GappRubric r = default_rubric();
  std::map<int, GappGrade> grade_by_total;
  int combos = 0;
  for (int p = 0; p < 3; ++p)
    for (double cell : kCellReps)
      for (int nec = 0; nec < 2; ++nec)
        for (int inv = 0; inv < 2; ++inv)
          for (double ki : kKiReps)
            for (int cat = 0; cat < 3; ++cat) {
              const auto pattern = static_cast<HistologicPattern>(p);
              const auto catechol = static_cast<CatecholamineType>(cat);
              const auto s =
                  score_components(make(pattern, cell, nec != 0, inv != 0, ki, catechol), r);
              const int expected = hand_total(pattern, cell, nec != 0, inv != 0, ki, catechol);
              REQUIRE(s.total == expected);
              REQUIRE(s.total == s.pattern_points + s.cellularity_points + s.necrosis_points +
                                     s.invasion_points + s.ki67_points + s.catecholamine_points);
              REQUIRE(s.total >= 0);
              REQUIRE(s.total <= r.max_total);
              // Grade must be a pure function of the total.
              const auto [it, inserted] = grade_by_total.emplace(s.total, s.grade);
              REQUIRE(it->second == s.grade);
              ++combos;
            }
  CHECK(combos == 324);
}

TEST_CASE("raising ki67 or cellularity never lowers the total") {
  Rng rng(99);
  const GappRubric r = default_rubric();
  for (int i = 0; i < 300; ++i) {
    auto c = make(static_cast<HistologicPattern>(rng.uniform_index(3)), rng.uniform(0.0, 400.0),
                  rng.bernoulli(0.5), rng.bernoulli(0.5), rng.uniform(0.0, 10.0),
                  static_cast<CatecholamineType>(rng.uniform_index(3)));
    const int before = score_components(c, r).total;
    auto raised = c;
    raised.ki67_percent = std::min(100.0, c.ki67_percent + rng.uniform(0.0, 5.0));
    CHECK(score_components(raised, r).total >= before);
    raised = c;
    raised.cellularity_cells_per_unit += rng.uniform(0.0, 200.0);
    CHECK(score_components(raised, r).total >= before);
  }
}

TEST_CASE("gapp_total_mae basics") {
  const GappRubric r = default_rubric();
  const auto s0 = score_components(make(HistologicPattern::Zellballen, 100, false, false, 0.5,
                                        CatecholamineType::EpinephrineType),
                                   r);
  GappScore a = s0, b = s0, c = s0, d = s0;
  a.total = 2;
  b.total = 4;
  c.total = 3;
  d.total = 6;
  CHECK(gapp_total_mae({a, b}, {a, b}) == 0.0);
  CHECK(gapp_total_mae({a, b}, {c, d}) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK_THROWS_AS(gapp_total_mae({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(gapp_total_mae({a}, {a, b}), std::invalid_argument);
}

TEST_CASE("gapp_total_mae matches a naive oracle on 50 random pairs") {
  Rng rng(123);
  std::vector<GappScore> pred(50), truth(50);
  double naive = 0.0;
  for (int i = 0; i < 50; ++i) {
    pred[i].total = static_cast<int>(rng.uniform_index(11));
    truth[i].total = static_cast<int>(rng.uniform_index(11));
    naive += std::abs(pred[i].total - truth[i].total);
  }
  naive /= 50.0;
  CHECK(std::abs(gapp_total_mae(pred, truth) - naive) < 1e-12);
}

TEST_CASE("rubric validation rejects bad configurations") {
  GappRubric r = default_rubric();
  r.cellularity_breaks = {250.0, 150.0};
  CHECK_THROWS_AS(validate(r), std::invalid_argument);
  r = default_rubric();
  r.max_total = 9;
  CHECK_THROWS_AS(validate(r), std::invalid_argument);
  r = default_rubric();
  r.necrosis_points = -1;
  CHECK_THROWS_AS(validate(r), std::invalid_argument);
}

TEST_CASE("shipped rubric file matches the built-in default") {
  const GappRubric from_file = load_rubric(std::string(PPGL_DATA_DIR) + "/default_rubric.json");
  const GappRubric builtin = default_rubric();
  CHECK(from_file.pattern_points == builtin.pattern_points);
  CHECK(from_file.cellularity_breaks == builtin.cellularity_breaks);
  CHECK(from_file.cellularity_points == builtin.cellularity_points);
  CHECK(from_file.necrosis_points == builtin.necrosis_points);
  CHECK(from_file.invasion_points == builtin.invasion_points);
  CHECK(from_file.ki67_breaks == builtin.ki67_breaks);
  CHECK(from_file.ki67_points == builtin.ki67_points);
  CHECK(from_file.catecholamine_points == builtin.catecholamine_points);
  CHECK(from_file.grade_breaks == builtin.grade_breaks);
  CHECK(from_file.max_total == builtin.max_total);
}
