#include "ppgl/report.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ppgl {

using nlohmann::json;

GappScore score_reported(const ReportedFindings& f, const GappRubric& rubric) {
  validate(rubric);
  GappScore s;
  if (f.histologic_pattern) s.pattern_points = rubric.pattern_points.at(*f.histologic_pattern);
  if (f.cellularity_cells_per_unit)
    s.cellularity_points =
        rubric.cellularity_points[band_index(*f.cellularity_cells_per_unit, rubric.cellularity_breaks)];
  if (f.comedo_necrosis && *f.comedo_necrosis) s.necrosis_points = rubric.necrosis_points;
  if (f.vascular_capsular_invasion && *f.vascular_capsular_invasion)
    s.invasion_points = rubric.invasion_points;
  if (f.ki67_percent) s.ki67_points = rubric.ki67_points[band_index(*f.ki67_percent, rubric.ki67_breaks)];
  if (f.catecholamine_type) s.catecholamine_points = rubric.catecholamine_points.at(*f.catecholamine_type);
  s.total = s.pattern_points + s.cellularity_points + s.necrosis_points + s.invasion_points +
            s.ki67_points + s.catecholamine_points;
  s.grade = grade_for_total(s.total, rubric);
  return s;
}

namespace {

struct LatestObservation {
  const Observation* obs = nullptr;
  int step_index = -1;
};

std::array<LatestObservation, kSubTaskCount> latest_by_task(const std::vector<TrailEntry>& history) {
  std::array<LatestObservation, kSubTaskCount> latest{};
  for (const TrailEntry& entry : history) {
    if (entry.observation.is_error() || entry.observation.is_report_request()) continue;
    auto& slot = latest[static_cast<int>(entry.observation.task)];
    slot.obs = &entry.observation;
    slot.step_index = entry.step_index;
  }
  return latest;
}

std::string fixed4(double v) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4) << v;
  return out.str();
}

std::string evidence_ref(int step_index) { return "[evidence #" + std::to_string(step_index) + "]"; }

}  // namespace

DiagnosticReport assemble_report(const std::string& case_id, const std::vector<TrailEntry>& history,
                                 const GappRubric& rubric, const KnowledgeGraph& graph,
                                 double alert_threshold) {
  DiagnosticReport report;
  report.case_id = case_id;
  report.evidence_trail = history;

  const auto latest = latest_by_task(history);
  const auto task_slot = [&](SubTask t) -> const LatestObservation& {
    return latest[static_cast<int>(t)];
  };

  ReportedFindings& f = report.component_findings;
  if (const auto& slot = task_slot(SubTask::HistPattern); slot.obs)
    f.histologic_pattern = std::get<HistologicPattern>(slot.obs->payload);
  if (const auto& slot = task_slot(SubTask::Necrosis); slot.obs)
    f.comedo_necrosis = std::get<bool>(slot.obs->payload);
  if (const auto& slot = task_slot(SubTask::Invasion); slot.obs)
    f.vascular_capsular_invasion = std::get<bool>(slot.obs->payload);
  if (const auto& slot = task_slot(SubTask::Cellularity); slot.obs)
    f.cellularity_cells_per_unit = std::get<double>(slot.obs->payload);
  if (const auto& slot = task_slot(SubTask::Ki67); slot.obs)
    f.ki67_percent = std::get<double>(slot.obs->payload);
  if (const auto& slot = task_slot(SubTask::CatecholaminePhenotype); slot.obs)
    f.catecholamine_type = std::get<CatecholamineType>(slot.obs->payload);
  report.catecholamine_phenotype = f.catecholamine_type;

  const auto conf_of = [&](SubTask t, const char* gene) {
    if (const auto& slot = task_slot(t); slot.obs)
      report.mutation_confidences[gene] = std::get<double>(slot.obs->payload);
  };
  conf_of(SubTask::MutConfSDHB, "SDHB");
  conf_of(SubTask::MutConfVHL, "VHL");
  conf_of(SubTask::MutConfRET, "RET");

  report.gapp_score = score_reported(f, rubric);

  // Phenotype proxy for the alert rationale, grounded in the observed
  // phenotype rather than the case's hidden labs.
  LabPanel observed_labs;
  if (f.catecholamine_type == CatecholamineType::EpinephrineType) observed_labs.metanephrine = 2.0;
  if (f.catecholamine_type == CatecholamineType::NorepinephrineType) observed_labs.normetanephrine = 2.0;
  report.alerts = evaluate_alerts(graph, report.mutation_confidences, observed_labs, alert_threshold);

  // Narrative: fixed section order, every claim line referencing evidence.
  std::ostringstream n;
  n << "== Findings ==\n";
  const auto claim = [&](const std::string& label, const std::string& value, int step_index) {
    n << label << ": " << value << ' ' << evidence_ref(step_index) << '\n';
  };
  const auto unassessed = [&](const std::string& label) { n << label << ": not assessed\n"; };

  if (f.histologic_pattern)
    claim("Histologic pattern", to_string(*f.histologic_pattern), task_slot(SubTask::HistPattern).step_index);
  else
    unassessed("Histologic pattern");
  if (f.cellularity_cells_per_unit)
    claim("Cellularity", fixed4(*f.cellularity_cells_per_unit) + " cells/field",
          task_slot(SubTask::Cellularity).step_index);
  else
    unassessed("Cellularity");
  if (f.comedo_necrosis)
    claim("Comedo-type necrosis", *f.comedo_necrosis ? "present" : "absent",
          task_slot(SubTask::Necrosis).step_index);
  else
    unassessed("Comedo-type necrosis");
  if (f.vascular_capsular_invasion)
    claim("Vascular/capsular invasion", *f.vascular_capsular_invasion ? "present" : "absent",
          task_slot(SubTask::Invasion).step_index);
  else
    unassessed("Vascular/capsular invasion");
  if (f.ki67_percent)
    claim("Ki-67 index", fixed4(*f.ki67_percent) + "%", task_slot(SubTask::Ki67).step_index);
  else
    unassessed("Ki-67 index");
  if (f.catecholamine_type)
    claim("Catecholamine phenotype", to_string(*f.catecholamine_type),
          task_slot(SubTask::CatecholaminePhenotype).step_index);
  else
    unassessed("Catecholamine phenotype");
  if (const auto& slot = task_slot(SubTask::LabSummary); slot.obs)
    claim("Laboratory panel", std::get<std::string>(slot.obs->payload), slot.step_index);

  n << "== GAPP ==\n";
  const auto point_line = [&](const std::string& label, int points, SubTask task, bool assessed) {
    if (assessed)
      claim(label, std::to_string(points), task_slot(task).step_index);
    else
      unassessed(label);
  };
  point_line("Pattern points", report.gapp_score.pattern_points, SubTask::HistPattern,
             f.histologic_pattern.has_value());
  point_line("Cellularity points", report.gapp_score.cellularity_points, SubTask::Cellularity,
             f.cellularity_cells_per_unit.has_value());
  point_line("Necrosis points", report.gapp_score.necrosis_points, SubTask::Necrosis,
             f.comedo_necrosis.has_value());
  point_line("Invasion points", report.gapp_score.invasion_points, SubTask::Invasion,
             f.vascular_capsular_invasion.has_value());
  point_line("Ki-67 points", report.gapp_score.ki67_points, SubTask::Ki67, f.ki67_percent.has_value());
  point_line("Catecholamine points", report.gapp_score.catecholamine_points,
             SubTask::CatecholaminePhenotype, f.catecholamine_type.has_value());
  n << "GAPP total: " << report.gapp_score.total << " of " << rubric.max_total << ", grade "
    << to_string(report.gapp_score.grade) << " [sum of points above]\n";

  n << "== Genotype Risk ==\n";
  const auto risk_line = [&](const char* gene, SubTask task) {
    const auto it = report.mutation_confidences.find(gene);
    if (it == report.mutation_confidences.end()) {
      unassessed(std::string(gene) + " mutation confidence");
      return;
    }
    std::string value = fixed4(it->second);
    const RetrievalResult node = graph.retrieve(gene);
    if (node.found) {
      if (const auto attr = node.node.attributes.find("metastatic_risk_range");
          attr != node.node.attributes.end())
        value += " (KG metastatic risk range " + attr->second + ")";
    }
    claim(std::string(gene) + " mutation confidence", value, task_slot(task).step_index);
  };
  risk_line("SDHB", SubTask::MutConfSDHB);
  risk_line("VHL", SubTask::MutConfVHL);
  risk_line("RET", SubTask::MutConfRET);

  n << "== Alerts ==\n";
  if (report.alerts.empty()) {
    n << "Syndrome alerts: none\n";
  } else {
    for (const RiskAlert& alert : report.alerts) {
      const SubTask task = alert.trigger_entity == "VHL" ? SubTask::MutConfVHL : SubTask::MutConfRET;
      claim(to_string(alert.syndrome) + " alert",
            "trigger " + alert.trigger_entity + ", confidence " + fixed4(alert.confidence),
            task_slot(task).step_index);
    }
  }

  n << "== Evidence ==\n";
  for (const TrailEntry& entry : report.evidence_trail) {
    n << '#' << entry.step_index << ' ';
    if (entry.action.emit_report)
      n << "emit_report";
    else
      n << "call(" << to_string(entry.action.swarm) << ", " << to_string(entry.action.task) << ")";
    n << " -> " << payload_digest(entry.observation.payload) << '\n';
  }
  report.narrative = n.str();
  return report;
}

namespace {

void fail(const std::string& what) { throw std::logic_error("report invariant violated: " + what); }

template <typename T>
bool trail_has_value(const std::vector<TrailEntry>& trail, SubTask task, const T& value) {
  return std::any_of(trail.begin(), trail.end(), [&](const TrailEntry& e) {
    if (e.observation.task != task || e.observation.is_error() || e.observation.is_report_request())
      return false;
    const T* got = std::get_if<T>(&e.observation.payload);
    return got != nullptr && *got == value;
  });
}

}  // namespace

void check_report_invariants(const DiagnosticReport& report, const GappRubric& rubric) {
  if (score_reported(report.component_findings, rubric) != report.gapp_score)
    fail("gapp_score does not re-derive from component_findings");

  const ReportedFindings& f = report.component_findings;
  if (f.histologic_pattern &&
      !trail_has_value(report.evidence_trail, SubTask::HistPattern, *f.histologic_pattern))
    fail("histologic_pattern has no supporting evidence");
  if (f.cellularity_cells_per_unit &&
      !trail_has_value(report.evidence_trail, SubTask::Cellularity, *f.cellularity_cells_per_unit))
    fail("cellularity has no supporting evidence");
  if (f.comedo_necrosis && !trail_has_value(report.evidence_trail, SubTask::Necrosis, *f.comedo_necrosis))
    fail("comedo_necrosis has no supporting evidence");
  if (f.vascular_capsular_invasion &&
      !trail_has_value(report.evidence_trail, SubTask::Invasion, *f.vascular_capsular_invasion))
    fail("vascular_capsular_invasion has no supporting evidence");
  if (f.ki67_percent && !trail_has_value(report.evidence_trail, SubTask::Ki67, *f.ki67_percent))
    fail("ki67_percent has no supporting evidence");
  if (f.catecholamine_type &&
      !trail_has_value(report.evidence_trail, SubTask::CatecholaminePhenotype, *f.catecholamine_type))
    fail("catecholamine_type has no supporting evidence");
  if (report.catecholamine_phenotype != f.catecholamine_type)
    fail("catecholamine_phenotype disagrees with component_findings");

  static const std::map<std::string, SubTask> kGeneTasks{{"SDHB", SubTask::MutConfSDHB},
                                                         {"VHL", SubTask::MutConfVHL},
                                                         {"RET", SubTask::MutConfRET}};
  for (const auto& [gene, conf] : report.mutation_confidences) {
    const auto it = kGeneTasks.find(gene);
    if (it == kGeneTasks.end()) fail("unknown gene '" + gene + "' in mutation_confidences");
    if (!trail_has_value(report.evidence_trail, it->second, conf))
      fail("confidence for " + gene + " has no supporting evidence");
  }

  // Narrative: fixed section order and per-line evidence references.
  static const std::array<std::string, 5> kSections{"== Findings ==", "== GAPP ==",
                                                    "== Genotype Risk ==", "== Alerts ==",
                                                    "== Evidence =="};
  std::size_t cursor = 0;
  for (const std::string& header : kSections) {
    const std::size_t at = report.narrative.find(header, cursor);
    if (at == std::string::npos) fail("narrative missing or misordered section " + header);
    cursor = at;
  }

  std::istringstream lines(report.narrative);
  std::string line;
  int section = -1;
  while (std::getline(lines, line)) {
    if (line.rfind("== ", 0) == 0) {
      ++section;
      continue;
    }
    if (section < 0 || section >= 4 || line.empty()) continue;  // claims live before == Evidence ==
    if (line.find("not assessed") != std::string::npos) continue;
    if (line.find(": none") != std::string::npos) continue;
    if (line.find("[sum of points above]") != std::string::npos) continue;
    const std::size_t ref = line.find("[evidence #");
    if (ref == std::string::npos) fail("narrative claim without evidence reference: " + line);
    const int idx = std::stoi(line.substr(ref + 11));
    const bool known = std::any_of(report.evidence_trail.begin(), report.evidence_trail.end(),
                                   [&](const TrailEntry& e) { return e.step_index == idx; });
    if (!known) fail("narrative references unknown evidence index " + std::to_string(idx));
  }
}

json to_json(const RiskAlert& alert) {
  return json{{"syndrome", to_string(alert.syndrome)},
              {"trigger_entity", alert.trigger_entity},
              {"confidence", alert.confidence},
              {"rationale", alert.rationale}};
}

json to_json(const ReportedFindings& f) {
  json j;
  j["histologic_pattern"] = f.histologic_pattern ? json(to_string(*f.histologic_pattern)) : json();
  j["cellularity_cells_per_unit"] =
      f.cellularity_cells_per_unit ? json(*f.cellularity_cells_per_unit) : json();
  j["comedo_necrosis"] = f.comedo_necrosis ? json(*f.comedo_necrosis) : json();
  j["vascular_capsular_invasion"] =
      f.vascular_capsular_invasion ? json(*f.vascular_capsular_invasion) : json();
  j["ki67_percent"] = f.ki67_percent ? json(*f.ki67_percent) : json();
  j["catecholamine_type"] = f.catecholamine_type ? json(to_string(*f.catecholamine_type)) : json();
  return j;
}

json to_json(const DiagnosticReport& report) {
  json alerts = json::array();
  for (const RiskAlert& a : report.alerts) alerts.push_back(to_json(a));
  json trail = json::array();
  for (const TrailEntry& e : report.evidence_trail) trail.push_back(to_json(e));
  return json{{"case_id", report.case_id},
              {"component_findings", to_json(report.component_findings)},
              {"gapp_score", to_json(report.gapp_score)},
              {"mutation_confidences", report.mutation_confidences},
              {"alerts", alerts},
              {"catecholamine_phenotype",
               report.catecholamine_phenotype ? json(to_string(*report.catecholamine_phenotype)) : json()},
              {"evidence_trail", trail},
              {"narrative", report.narrative}};
}

}  // namespace ppgl
