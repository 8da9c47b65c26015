#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ppgl/case_model.hpp"

namespace ppgl {

enum class GappGrade { WellDifferentiated, ModeratelyDifferentiated, PoorlyDifferentiated };

std::string to_string(GappGrade g);

// Configurable scoring rubric. Band thresholds are strictly ascending and
// a value exactly on a break belongs to the higher band.
struct GappRubric {
  std::map<HistologicPattern, int> pattern_points;
  std::array<double, 2> cellularity_breaks{};  // low/moderate, moderate/high
  std::array<int, 3> cellularity_points{};
  int necrosis_points = 0;
  int invasion_points = 0;
  std::array<double, 2> ki67_breaks{};
  std::array<int, 3> ki67_points{};
  std::map<CatecholamineType, int> catecholamine_points;
  std::array<int, 2> grade_breaks{};  // totals below first -> well differentiated
  int max_total = 0;                  // documented rubric maximum

  int max_achievable_total() const;
};

struct GappScore {
  int pattern_points = 0;
  int cellularity_points = 0;
  int necrosis_points = 0;
  int invasion_points = 0;
  int ki67_points = 0;
  int catecholamine_points = 0;
  int total = 0;
  GappGrade grade = GappGrade::WellDifferentiated;

  bool operator==(const GappScore&) const = default;
};

// Throws std::invalid_argument when thresholds are not ascending, any point
// value is negative, or the achievable maximum disagrees with max_total.
void validate(const GappRubric& rubric);

GappRubric default_rubric();
GappRubric rubric_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GappRubric& rubric);
GappRubric load_rubric(const std::string& path);

nlohmann::json to_json(const GappScore& score);

// Band index 0/1/2 for a value against two ascending breaks; ties go up.
int band_index(double value, const std::array<double, 2>& breaks);

GappGrade grade_for_total(int total, const GappRubric& rubric);

GappScore score_components(const GappComponents& components, const GappRubric& rubric);

// Mean absolute error between aligned totals.
double gapp_total_mae(const std::vector<GappScore>& predicted, const std::vector<GappScore>& truth);

}  // namespace ppgl
