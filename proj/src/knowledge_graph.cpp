#include "ppgl/knowledge_graph.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ppgl {

using nlohmann::json;

namespace {

std::string lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string to_string(Syndrome s) {
  switch (s) {
    case Syndrome::VHLSyndrome: return "VHL syndrome";
    case Syndrome::MEN2: return "MEN2";
  }
  throw std::invalid_argument("unknown syndrome");
}

KnowledgeGraph KnowledgeGraph::from_nodes(std::vector<KnowledgeNode> nodes) {
  KnowledgeGraph g;
  g.nodes_ = std::move(nodes);
  for (std::size_t i = 0; i < g.nodes_.size(); ++i) {
    const KnowledgeNode& node = g.nodes_[i];
    if (node.entity.empty()) throw std::invalid_argument("knowledge graph: empty entity name");
    if (!g.index_.emplace(lower(node.entity), i).second)
      throw std::invalid_argument("knowledge graph: duplicate entity '" + node.entity + "'");
  }
  // Referential integrity, then acyclicity by chain walking.
  for (const KnowledgeNode& node : g.nodes_) {
    if (node.hypernym.empty()) continue;
    if (!g.index_.count(lower(node.hypernym)))
      throw std::invalid_argument("knowledge graph: node '" + node.entity +
                                  "' has dangling hypernym '" + node.hypernym + "'");
  }
  for (const KnowledgeNode& node : g.nodes_) {
    std::vector<std::string> chain{node.entity};
    const KnowledgeNode* current = &node;
    while (!current->hypernym.empty()) {
      current = &g.nodes_[g.index_.at(lower(current->hypernym))];
      if (std::find_if(chain.begin(), chain.end(), [&](const std::string& e) {
            return lower(e) == lower(current->entity);
          }) != chain.end()) {
        std::ostringstream msg;
        msg << "knowledge graph: hypernym cycle:";
        for (const std::string& e : chain) msg << ' ' << e << " ->";
        msg << ' ' << current->entity;
        throw std::invalid_argument(msg.str());
      }
      chain.push_back(current->entity);
      if (chain.size() > g.nodes_.size() + 1)
        throw std::invalid_argument("knowledge graph: hypernym chain exceeds node count");
    }
  }
  return g;
}

RetrievalResult KnowledgeGraph::retrieve(const std::string& query_entity) const {
  RetrievalResult result;
  const auto it = index_.find(lower(query_entity));
  if (it == index_.end()) return result;  // not-found, nothing fabricated
  result.found = true;
  result.node = nodes_[it->second];
  const KnowledgeNode* current = &result.node;
  while (!current->hypernym.empty()) {
    current = &nodes_[index_.at(lower(current->hypernym))];
    result.ancestors.push_back(*current);
  }
  return result;
}

KnowledgeGraph graph_from_json(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("knowledge graph: expected a JSON array of nodes");
  std::vector<KnowledgeNode> nodes;
  nodes.reserve(j.size());
  for (const json& nj : j) {
    KnowledgeNode node;
    node.entity = nj.at("entity").get<std::string>();
    node.hypernym = nj.value("hypernym", std::string{});
    node.description = nj.at("description").get<std::string>();
    if (nj.contains("attributes"))
      node.attributes = nj.at("attributes").get<std::map<std::string, std::string>>();
    nodes.push_back(std::move(node));
  }
  return KnowledgeGraph::from_nodes(std::move(nodes));
}

KnowledgeGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_graph: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("load_graph: " + path + ": " + e.what());
  }
  return graph_from_json(j);
}

json to_json(const KnowledgeNode& node) {
  return json{{"entity", node.entity},
              {"hypernym", node.hypernym},
              {"description", node.description},
              {"attributes", node.attributes}};
}

json to_json(const KnowledgeGraph& graph) {
  json arr = json::array();
  for (const KnowledgeNode& node : graph.nodes()) arr.push_back(to_json(node));
  return arr;
}

KnowledgeGraph default_graph() {
  std::vector<KnowledgeNode> nodes;
  nodes.push_back({"paraganglioma", "",
                   "Neuroendocrine tumor arising from paraganglia; all carry metastatic "
                   "potential and 15-25% develop metastatic disease.",
                   {{"metastatic_fraction", "15-25%"}, {"five_year_survival_metastatic", "34%"}}});
  nodes.push_back({"pheochromocytoma", "paraganglioma",
                   "Intra-adrenal paraganglioma secreting catecholamines; graded with the "
                   "six-component GAPP score.",
                   {}});
  nodes.push_back({"susceptibility gene", "",
                   "Germline-mutable gene predisposing to PPGL; about 33.8% of patients "
                   "carry a germline mutation.",
                   {{"germline_mutation_rate", "33.8%"}}});
  nodes.push_back({"SDHB", "susceptibility gene",
                   "Succinate dehydrogenase subunit B. Mutations confer a metastatic risk "
                   "of 35-75% and markedly shorter median survival (42 vs 244 months); not "
                   "captured by GAPP scoring.",
                   {{"metastatic_risk_range", "35-75%"},
                    {"median_survival_months", "42 vs 244"}}});
  nodes.push_back({"VHL", "susceptibility gene",
                   "Von Hippel-Lindau tumor suppressor. Germline mutations define VHL "
                   "syndrome and occur in 7.3% of PPGL patients; associated with "
                   "norepinephrine-type biochemistry.",
                   {{"germline_prevalence", "7.3%"}, {"syndrome", "VHL syndrome"}}});
  nodes.push_back({"RET", "susceptibility gene",
                   "RET proto-oncogene. Germline mutations define MEN2 and occur in 6.3% of "
                   "PPGL patients; associated with epinephrine-type biochemistry.",
                   {{"germline_prevalence", "6.3%"}, {"syndrome", "MEN2"}}});
  nodes.push_back({"hereditary syndrome", "",
                   "Heritable tumor syndrome requiring syndrome-specific treatment and "
                   "surveillance.",
                   {}});
  nodes.push_back({"VHL syndrome", "hereditary syndrome",
                   "Von Hippel-Lindau syndrome: hemangioblastomas, renal cell carcinoma, and "
                   "PPGL; demands lifelong syndrome-specific surveillance.",
                   {{"gene", "VHL"}}});
  nodes.push_back({"MEN2", "hereditary syndrome",
                   "Multiple endocrine neoplasia type 2: medullary thyroid carcinoma and "
                   "pheochromocytoma; demands syndrome-specific management.",
                   {{"gene", "RET"}}});
  nodes.push_back({"catecholamine metabolite", "",
                   "Plasma metabolite of catecholamine secretion; the elevation pattern "
                   "defines the biochemical phenotype (the sixth GAPP component).",
                   {}});
  nodes.push_back({"metanephrine", "catecholamine metabolite",
                   "Metabolite of epinephrine; elevation above 1.0 ULN marks the "
                   "epinephrine-type phenotype.",
                   {{"phenotype", "epinephrine"}}});
  nodes.push_back({"normetanephrine", "catecholamine metabolite",
                   "Metabolite of norepinephrine; isolated elevation above 1.0 ULN marks the "
                   "norepinephrine-type phenotype.",
                   {{"phenotype", "norepinephrine"}}});
  nodes.push_back({"3-methoxytyramine", "catecholamine metabolite",
                   "Metabolite of dopamine; carries no GAPP catecholamine points under the "
                   "default rubric but is reported when elevated.",
                   {{"phenotype", "dopaminergic"}}});
  return KnowledgeGraph::from_nodes(std::move(nodes));
}

std::vector<RiskAlert> evaluate_alerts(const KnowledgeGraph& graph,
                                       const std::map<std::string, double>& mutation_confidences,
                                       const LabPanel& labs, double alert_threshold) {
  if (!(alert_threshold > 0.0 && alert_threshold < 1.0))
    throw std::invalid_argument("evaluate_alerts: alert_threshold must be in (0,1)");
  for (const auto& [gene, conf] : mutation_confidences) {
    if (!(conf >= 0.0 && conf <= 1.0))
      throw std::invalid_argument("evaluate_alerts: confidence for " + gene + " out of [0,1]");
  }

  const CatecholamineType phenotype = catecholamine_phenotype(labs);
  std::vector<RiskAlert> alerts;
  const auto add_alert = [&](const std::string& gene, Syndrome syndrome) {
    const auto it = mutation_confidences.find(gene);
    if (it == mutation_confidences.end() || it->second < alert_threshold) return;
    const RetrievalResult gene_node = graph.retrieve(gene);
    std::ostringstream rationale;
    rationale << gene << " mutation confidence " << it->second << " >= " << alert_threshold
              << " raises a " << to_string(syndrome) << " alert.";
    if (gene_node.found) rationale << " KG[" << gene_node.node.entity << "]: " << gene_node.node.description;
    if (gene == "VHL" && phenotype == CatecholamineType::NorepinephrineType)
      rationale << " Norepinephrine-type biochemistry is consistent with VHL.";
    if (gene == "RET" && phenotype == CatecholamineType::EpinephrineType)
      rationale << " Epinephrine-type biochemistry is consistent with RET.";
    alerts.push_back(RiskAlert{syndrome, gene, it->second, rationale.str()});
  };
  add_alert("VHL", Syndrome::VHLSyndrome);
  add_alert("RET", Syndrome::MEN2);
  return alerts;
}

CatecholamineType catecholamine_phenotype(const LabPanel& labs) {
  validate(labs);
  if (labs.metanephrine > 1.0) return CatecholamineType::EpinephrineType;
  if (labs.normetanephrine > 1.0) return CatecholamineType::NorepinephrineType;
  return CatecholamineType::NonFunctioning;
}

}  // namespace ppgl
