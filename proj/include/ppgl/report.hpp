#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ppgl/gapp.hpp"
#include "ppgl/knowledge_graph.hpp"
#include "ppgl/swarm_types.hpp"

namespace ppgl {

// Component values as reported; empty optionals mean "not assessed".
struct ReportedFindings {
  std::optional<HistologicPattern> histologic_pattern;
  std::optional<double> cellularity_cells_per_unit;
  std::optional<bool> comedo_necrosis;
  std::optional<bool> vascular_capsular_invasion;
  std::optional<double> ki67_percent;
  std::optional<CatecholamineType> catecholamine_type;

  bool operator==(const ReportedFindings&) const = default;
};

struct DiagnosticReport {
  std::string case_id;
  ReportedFindings component_findings;
  GappScore gapp_score;  // unassessed components contribute 0 points
  std::map<std::string, double> mutation_confidences;
  std::vector<RiskAlert> alerts;
  std::optional<CatecholamineType> catecholamine_phenotype;
  std::vector<TrailEntry> evidence_trail;
  std::string narrative;  // fixed section order: Findings, GAPP, Genotype Risk, Alerts, Evidence
};

// Rubric scoring over the assessed subset; missing components score 0.
GappScore score_reported(const ReportedFindings& findings, const GappRubric& rubric);

// Builds the structured report from an episode history: latest successful
// observation wins per task, alerts come from the KG rules, the narrative is
// a deterministic template whose claims reference evidence indices.
DiagnosticReport assemble_report(const std::string& case_id, const std::vector<TrailEntry>& history,
                                 const GappRubric& rubric, const KnowledgeGraph& graph,
                                 double alert_threshold);

// Report self-consistency: gapp_score re-derives from findings, every
// reported value appears in the evidence trail for its task, and every
// narrative claim line carries a valid evidence reference. Throws
// std::logic_error describing the first violation.
void check_report_invariants(const DiagnosticReport& report, const GappRubric& rubric);

nlohmann::json to_json(const RiskAlert& alert);
nlohmann::json to_json(const ReportedFindings& findings);
nlohmann::json to_json(const DiagnosticReport& report);

}  // namespace ppgl
