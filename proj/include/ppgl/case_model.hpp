#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace ppgl {

enum class HistologicPattern { Zellballen, LargeIrregularNests, Pseudorosette };
enum class CatecholamineType { EpinephrineType, NorepinephrineType, NonFunctioning };

std::string to_string(HistologicPattern p);
std::string to_string(CatecholamineType t);
HistologicPattern pattern_from_string(const std::string& s);
CatecholamineType catecholamine_from_string(const std::string& s);

// The six GAPP criteria. Cellularity and Ki-67 carry continuous values;
// the rubric discretizes them into point bands.
struct GappComponents {
  HistologicPattern histologic_pattern = HistologicPattern::Zellballen;
  double cellularity_cells_per_unit = 0.0;  // cells per standardized field
  bool comedo_necrosis = false;
  bool vascular_capsular_invasion = false;
  double ki67_percent = 0.0;
  CatecholamineType catecholamine_type = CatecholamineType::NonFunctioning;

  bool operator==(const GappComponents&) const = default;
};

// Germline mutation flags. Generated corpora carry at most one positive.
struct GenotypeProfile {
  bool sdhb = false;
  bool vhl = false;
  bool ret = false;

  bool operator==(const GenotypeProfile&) const = default;
};

// Plasma values in multiples of the upper limit of normal (ULN).
struct LabPanel {
  double metanephrine = 0.0;
  double normetanephrine = 0.0;
  double methoxytyramine_3 = 0.0;

  bool operator==(const LabPanel&) const = default;
};

// Per-channel LAB mean/std pair, used both as a case's simulated slide
// statistics and as a normalization target.
struct StainStats {
  double mean_l = 0.0, mean_a = 0.0, mean_b = 0.0;
  double std_l = 1.0, std_a = 1.0, std_b = 1.0;

  bool operator==(const StainStats&) const = default;
};

struct CaseRecord {
  std::string case_id;
  GappComponents truth;
  GenotypeProfile genotype;
  LabPanel labs;
  StainStats stain_shift;
  std::uint64_t seed = 0;  // fully determines the case's noisy observations

  bool operator==(const CaseRecord&) const = default;
};

// Field-level validation; throws std::invalid_argument naming the field.
void validate(const GappComponents& c);
void validate(const LabPanel& labs);
void validate(const StainStats& s);
void validate(const CaseRecord& rec);

nlohmann::json to_json(const GappComponents& c);
nlohmann::json to_json(const GenotypeProfile& g);
nlohmann::json to_json(const LabPanel& labs);
nlohmann::json to_json(const StainStats& s);
nlohmann::json to_json(const CaseRecord& rec);

GappComponents components_from_json(const nlohmann::json& j);
GenotypeProfile genotype_from_json(const nlohmann::json& j);
LabPanel labs_from_json(const nlohmann::json& j);
StainStats stain_stats_from_json(const nlohmann::json& j);
CaseRecord case_from_json(const nlohmann::json& j);

// Line-delimited JSON corpus, one CaseRecord per line, file order preserved.
// Malformed records raise errors naming the line and offending field;
// duplicate case_ids are rejected.
std::vector<CaseRecord> load_corpus(const std::string& path);
void save_corpus(const std::vector<CaseRecord>& cases, const std::string& path);

}  // namespace ppgl
