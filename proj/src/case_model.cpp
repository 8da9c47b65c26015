#include "ppgl/case_model.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace ppgl {

using nlohmann::json;

std::string to_string(HistologicPattern p) {
  switch (p) {
    case HistologicPattern::Zellballen: return "zellballen";
    case HistologicPattern::LargeIrregularNests: return "large_irregular_nests";
    case HistologicPattern::Pseudorosette: return "pseudorosette";
  }
  throw std::invalid_argument("unknown histologic pattern");
}

std::string to_string(CatecholamineType t) {
  switch (t) {
    case CatecholamineType::EpinephrineType: return "epinephrine";
    case CatecholamineType::NorepinephrineType: return "norepinephrine";
    case CatecholamineType::NonFunctioning: return "non_functioning";
  }
  throw std::invalid_argument("unknown catecholamine type");
}

HistologicPattern pattern_from_string(const std::string& s) {
  if (s == "zellballen") return HistologicPattern::Zellballen;
  if (s == "large_irregular_nests") return HistologicPattern::LargeIrregularNests;
  if (s == "pseudorosette") return HistologicPattern::Pseudorosette;
  throw std::invalid_argument("histologic_pattern: unknown value '" + s + "'");
}

CatecholamineType catecholamine_from_string(const std::string& s) {
  if (s == "epinephrine") return CatecholamineType::EpinephrineType;
  if (s == "norepinephrine") return CatecholamineType::NorepinephrineType;
  if (s == "non_functioning") return CatecholamineType::NonFunctioning;
  throw std::invalid_argument("catecholamine_type: unknown value '" + s + "'");
}

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

double get_number(const json& j, const char* field) {
  if (!j.contains(field)) throw std::invalid_argument(std::string("missing field ") + field);
  const json& v = j.at(field);
  if (!v.is_number()) throw std::invalid_argument(std::string(field) + ": expected a number");
  return v.get<double>();
}

bool get_bool(const json& j, const char* field) {
  if (!j.contains(field)) throw std::invalid_argument(std::string("missing field ") + field);
  const json& v = j.at(field);
  if (!v.is_boolean()) throw std::invalid_argument(std::string(field) + ": expected a boolean");
  return v.get<bool>();
}

std::string get_string(const json& j, const char* field) {
  if (!j.contains(field)) throw std::invalid_argument(std::string("missing field ") + field);
  const json& v = j.at(field);
  if (!v.is_string()) throw std::invalid_argument(std::string(field) + ": expected a string");
  return v.get<std::string>();
}

}  // namespace

void validate(const GappComponents& c) {
  require(c.cellularity_cells_per_unit >= 0.0, "cellularity_cells_per_unit: must be >= 0");
  require(std::isfinite(c.cellularity_cells_per_unit), "cellularity_cells_per_unit: must be finite");
  require(c.ki67_percent >= 0.0 && c.ki67_percent <= 100.0, "ki67_percent: must be in [0,100]");
}

void validate(const LabPanel& labs) {
  require(labs.metanephrine >= 0.0, "metanephrine: must be >= 0");
  require(labs.normetanephrine >= 0.0, "normetanephrine: must be >= 0");
  require(labs.methoxytyramine_3 >= 0.0, "methoxytyramine_3: must be >= 0");
}

void validate(const StainStats& s) {
  require(s.std_l > 0.0, "std_l: must be > 0");
  require(s.std_a > 0.0, "std_a: must be > 0");
  require(s.std_b > 0.0, "std_b: must be > 0");
}

void validate(const CaseRecord& rec) {
  require(!rec.case_id.empty(), "case_id: must be non-empty");
  validate(rec.truth);
  validate(rec.labs);
  validate(rec.stain_shift);
}

json to_json(const GappComponents& c) {
  return json{{"histologic_pattern", to_string(c.histologic_pattern)},
              {"cellularity_cells_per_unit", c.cellularity_cells_per_unit},
              {"comedo_necrosis", c.comedo_necrosis},
              {"vascular_capsular_invasion", c.vascular_capsular_invasion},
              {"ki67_percent", c.ki67_percent},
              {"catecholamine_type", to_string(c.catecholamine_type)}};
}

json to_json(const GenotypeProfile& g) {
  return json{{"sdhb", g.sdhb}, {"vhl", g.vhl}, {"ret", g.ret}};
}

json to_json(const LabPanel& labs) {
  return json{{"metanephrine", labs.metanephrine},
              {"normetanephrine", labs.normetanephrine},
              {"methoxytyramine_3", labs.methoxytyramine_3}};
}

json to_json(const StainStats& s) {
  return json{{"mean_l", s.mean_l}, {"mean_a", s.mean_a}, {"mean_b", s.mean_b},
              {"std_l", s.std_l},   {"std_a", s.std_a},   {"std_b", s.std_b}};
}

json to_json(const CaseRecord& rec) {
  return json{{"case_id", rec.case_id},
              {"truth", to_json(rec.truth)},
              {"genotype", to_json(rec.genotype)},
              {"labs", to_json(rec.labs)},
              {"stain_shift", to_json(rec.stain_shift)},
              {"seed", rec.seed}};
}

GappComponents components_from_json(const json& j) {
  GappComponents c;
  c.histologic_pattern = pattern_from_string(get_string(j, "histologic_pattern"));
  c.cellularity_cells_per_unit = get_number(j, "cellularity_cells_per_unit");
  c.comedo_necrosis = get_bool(j, "comedo_necrosis");
  c.vascular_capsular_invasion = get_bool(j, "vascular_capsular_invasion");
  c.ki67_percent = get_number(j, "ki67_percent");
  c.catecholamine_type = catecholamine_from_string(get_string(j, "catecholamine_type"));
  validate(c);
  return c;
}

GenotypeProfile genotype_from_json(const json& j) {
  return GenotypeProfile{get_bool(j, "sdhb"), get_bool(j, "vhl"), get_bool(j, "ret")};
}

LabPanel labs_from_json(const json& j) {
  LabPanel labs{get_number(j, "metanephrine"), get_number(j, "normetanephrine"),
                get_number(j, "methoxytyramine_3")};
  validate(labs);
  return labs;
}

StainStats stain_stats_from_json(const json& j) {
  StainStats s;
  s.mean_l = get_number(j, "mean_l");
  s.mean_a = get_number(j, "mean_a");
  s.mean_b = get_number(j, "mean_b");
  s.std_l = get_number(j, "std_l");
  s.std_a = get_number(j, "std_a");
  s.std_b = get_number(j, "std_b");
  validate(s);
  return s;
}

CaseRecord case_from_json(const json& j) {
  CaseRecord rec;
  rec.case_id = get_string(j, "case_id");
  if (rec.case_id.empty()) throw std::invalid_argument("case_id: must be non-empty");
  if (!j.contains("truth")) throw std::invalid_argument("missing field truth");
  rec.truth = components_from_json(j.at("truth"));
  if (!j.contains("genotype")) throw std::invalid_argument("missing field genotype");
  rec.genotype = genotype_from_json(j.at("genotype"));
  if (!j.contains("labs")) throw std::invalid_argument("missing field labs");
  rec.labs = labs_from_json(j.at("labs"));
  if (!j.contains("stain_shift")) throw std::invalid_argument("missing field stain_shift");
  rec.stain_shift = stain_stats_from_json(j.at("stain_shift"));
  if (!j.contains("seed") || !j.at("seed").is_number_unsigned())
    throw std::invalid_argument("seed: expected an unsigned integer");
  rec.seed = j.at("seed").get<std::uint64_t>();
  return rec;
}

std::vector<CaseRecord> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_corpus: cannot open " + path);
  std::vector<CaseRecord> cases;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      CaseRecord rec = case_from_json(j);
      if (!seen.insert(rec.case_id).second)
        throw std::invalid_argument("case_id: duplicate '" + rec.case_id + "'");
      cases.push_back(std::move(rec));
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "load_corpus: " << path << " line " << line_no << ": " << e.what();
      throw std::runtime_error(msg.str());
    }
  }
  return cases;
}

void save_corpus(const std::vector<CaseRecord>& cases, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("save_corpus: cannot open " + path + " for writing");
  for (const CaseRecord& rec : cases) {
    validate(rec);
    out << to_json(rec).dump() << '\n';
  }
  out.flush();
  if (!out) throw std::runtime_error("save_corpus: write to " + path + " failed");
}

}  // namespace ppgl
