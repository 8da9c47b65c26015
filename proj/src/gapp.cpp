#include "ppgl/gapp.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ppgl/numeric.hpp"

namespace ppgl {

using nlohmann::json;

std::string to_string(GappGrade g) {
  switch (g) {
    case GappGrade::WellDifferentiated: return "well_differentiated";
    case GappGrade::ModeratelyDifferentiated: return "moderately_differentiated";
    case GappGrade::PoorlyDifferentiated: return "poorly_differentiated";
  }
  throw std::invalid_argument("unknown grade");
}

int GappRubric::max_achievable_total() const {
  int pattern_max = 0;
  for (const auto& [_, pts] : pattern_points) pattern_max = std::max(pattern_max, pts);
  int cat_max = 0;
  for (const auto& [_, pts] : catecholamine_points) cat_max = std::max(cat_max, pts);
  const int cell_max = std::max({cellularity_points[0], cellularity_points[1], cellularity_points[2]});
  const int ki_max = std::max({ki67_points[0], ki67_points[1], ki67_points[2]});
  return pattern_max + cell_max + necrosis_points + invasion_points + ki_max + cat_max;
}

void validate(const GappRubric& rubric) {
  if (rubric.pattern_points.size() != 3)
    throw std::invalid_argument("rubric: pattern_points must cover all three patterns");
  if (rubric.catecholamine_points.size() != 3)
    throw std::invalid_argument("rubric: catecholamine_points must cover all three types");
  for (const auto& [_, pts] : rubric.pattern_points)
    if (pts < 0) throw std::invalid_argument("rubric: pattern point values must be >= 0");
  for (const auto& [_, pts] : rubric.catecholamine_points)
    if (pts < 0) throw std::invalid_argument("rubric: catecholamine point values must be >= 0");
  for (int p : rubric.cellularity_points)
    if (p < 0) throw std::invalid_argument("rubric: cellularity point values must be >= 0");
  for (int p : rubric.ki67_points)
    if (p < 0) throw std::invalid_argument("rubric: ki67 point values must be >= 0");
  if (rubric.necrosis_points < 0 || rubric.invasion_points < 0)
    throw std::invalid_argument("rubric: point values must be >= 0");
  if (!(rubric.cellularity_breaks[0] < rubric.cellularity_breaks[1]))
    throw std::invalid_argument("rubric: cellularity_breaks must be strictly ascending");
  if (!(rubric.ki67_breaks[0] < rubric.ki67_breaks[1]))
    throw std::invalid_argument("rubric: ki67_breaks must be strictly ascending");
  if (!(rubric.grade_breaks[0] < rubric.grade_breaks[1]))
    throw std::invalid_argument("rubric: grade_breaks must be strictly ascending");
  if (rubric.max_achievable_total() != rubric.max_total)
    throw std::invalid_argument("rubric: max_total does not equal the achievable maximum");
}

GappRubric default_rubric() {
  GappRubric r;
  r.pattern_points = {{HistologicPattern::Zellballen, 0},
                      {HistologicPattern::LargeIrregularNests, 1},
                      {HistologicPattern::Pseudorosette, 2}};
  r.cellularity_breaks = {150.0, 250.0};
  r.cellularity_points = {0, 1, 2};
  r.necrosis_points = 2;
  r.invasion_points = 1;
  r.ki67_breaks = {1.0, 3.0};
  r.ki67_points = {0, 1, 2};
  r.catecholamine_points = {{CatecholamineType::EpinephrineType, 0},
                            {CatecholamineType::NorepinephrineType, 1},
                            {CatecholamineType::NonFunctioning, 0}};
  r.grade_breaks = {3, 7};
  r.max_total = 10;
  return r;
}

namespace {

std::array<double, 2> breaks_from_json(const json& j, const char* field) {
  const auto arr = j.at(field).get<std::vector<double>>();
  if (arr.size() != 2) throw std::invalid_argument(std::string("rubric: ") + field + " must have 2 entries");
  return {arr[0], arr[1]};
}

std::array<int, 3> points3_from_json(const json& j, const char* field) {
  const auto arr = j.at(field).get<std::vector<int>>();
  if (arr.size() != 3) throw std::invalid_argument(std::string("rubric: ") + field + " must have 3 entries");
  return {arr[0], arr[1], arr[2]};
}

}  // namespace

GappRubric rubric_from_json(const json& j) {
  GappRubric r;
  for (const auto& [key, value] : j.at("pattern_points").items())
    r.pattern_points[pattern_from_string(key)] = value.get<int>();
  r.cellularity_breaks = breaks_from_json(j, "cellularity_breaks");
  r.cellularity_points = points3_from_json(j, "cellularity_points");
  r.necrosis_points = j.at("necrosis_points").get<int>();
  r.invasion_points = j.at("invasion_points").get<int>();
  r.ki67_breaks = breaks_from_json(j, "ki67_breaks");
  r.ki67_points = points3_from_json(j, "ki67_points");
  for (const auto& [key, value] : j.at("catecholamine_points").items())
    r.catecholamine_points[catecholamine_from_string(key)] = value.get<int>();
  const auto gb = j.at("grade_breaks").get<std::vector<int>>();
  if (gb.size() != 2) throw std::invalid_argument("rubric: grade_breaks must have 2 entries");
  r.grade_breaks = {gb[0], gb[1]};
  r.max_total = j.at("max_total").get<int>();
  validate(r);
  return r;
}

json to_json(const GappRubric& rubric) {
  json pattern, catechol;
  for (const auto& [k, v] : rubric.pattern_points) pattern[to_string(k)] = v;
  for (const auto& [k, v] : rubric.catecholamine_points) catechol[to_string(k)] = v;
  return json{{"pattern_points", pattern},
              {"cellularity_breaks", rubric.cellularity_breaks},
              {"cellularity_points", rubric.cellularity_points},
              {"necrosis_points", rubric.necrosis_points},
              {"invasion_points", rubric.invasion_points},
              {"ki67_breaks", rubric.ki67_breaks},
              {"ki67_points", rubric.ki67_points},
              {"catecholamine_points", catechol},
              {"grade_breaks", rubric.grade_breaks},
              {"max_total", rubric.max_total}};
}

GappRubric load_rubric(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_rubric: cannot open " + path);
  json j;
  in >> j;
  return rubric_from_json(j);
}

json to_json(const GappScore& score) {
  return json{{"pattern_points", score.pattern_points},
              {"cellularity_points", score.cellularity_points},
              {"necrosis_points", score.necrosis_points},
              {"invasion_points", score.invasion_points},
              {"ki67_points", score.ki67_points},
              {"catecholamine_points", score.catecholamine_points},
              {"total", score.total},
              {"grade", to_string(score.grade)}};
}

int band_index(double value, const std::array<double, 2>& breaks) {
  if (value < breaks[0]) return 0;
  if (value < breaks[1]) return 1;
  return 2;
}

GappGrade grade_for_total(int total, const GappRubric& rubric) {
  if (total < rubric.grade_breaks[0]) return GappGrade::WellDifferentiated;
  if (total < rubric.grade_breaks[1]) return GappGrade::ModeratelyDifferentiated;
  return GappGrade::PoorlyDifferentiated;
}

GappScore score_components(const GappComponents& components, const GappRubric& rubric) {
  validate(components);
  validate(rubric);
  GappScore s;
  s.pattern_points = rubric.pattern_points.at(components.histologic_pattern);
  s.cellularity_points =
      rubric.cellularity_points[band_index(components.cellularity_cells_per_unit, rubric.cellularity_breaks)];
  s.necrosis_points = components.comedo_necrosis ? rubric.necrosis_points : 0;
  s.invasion_points = components.vascular_capsular_invasion ? rubric.invasion_points : 0;
  s.ki67_points = rubric.ki67_points[band_index(components.ki67_percent, rubric.ki67_breaks)];
  s.catecholamine_points = rubric.catecholamine_points.at(components.catecholamine_type);
  s.total = s.pattern_points + s.cellularity_points + s.necrosis_points + s.invasion_points +
            s.ki67_points + s.catecholamine_points;
  s.grade = grade_for_total(s.total, rubric);
  return s;
}

double gapp_total_mae(const std::vector<GappScore>& predicted, const std::vector<GappScore>& truth) {
  if (predicted.empty() || truth.empty())
    throw std::invalid_argument("gapp_total_mae: lists must be nonempty");
  if (predicted.size() != truth.size())
    throw std::invalid_argument("gapp_total_mae: list lengths differ");
  KahanSum sum;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    sum.add(std::abs(static_cast<double>(predicted[i].total) - static_cast<double>(truth[i].total)));
  return sum.value() / static_cast<double>(predicted.size());
}

}  // namespace ppgl
