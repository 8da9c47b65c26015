#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ppgl/case_model.hpp"

namespace ppgl {

// Entity + hypernym + description triple; attributes carry structured facts
// such as metastatic risk ranges.
struct KnowledgeNode {
  std::string entity;
  std::string hypernym;  // empty = root, otherwise names an existing node
  std::string description;
  std::map<std::string, std::string> attributes;

  bool operator==(const KnowledgeNode&) const = default;
};

enum class Syndrome { VHLSyndrome, MEN2 };

std::string to_string(Syndrome s);

struct RiskAlert {
  Syndrome syndrome = Syndrome::VHLSyndrome;
  std::string trigger_entity;
  double confidence = 0.0;
  std::string rationale;  // cites the retrieved node

  bool operator==(const RiskAlert&) const = default;
};

// Unknown entities return found == false and nothing else; the graph never
// fabricates content for entities it does not hold.
struct RetrievalResult {
  bool found = false;
  KnowledgeNode node;
  std::vector<KnowledgeNode> ancestors;  // hypernym chain toward the root
};

class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  // Verifies uniqueness, referential integrity, and acyclicity; throws
  // std::invalid_argument naming the offender on violation.
  static KnowledgeGraph from_nodes(std::vector<KnowledgeNode> nodes);

  // Case-insensitive exact-match lookup.
  RetrievalResult retrieve(const std::string& query_entity) const;

  const std::vector<KnowledgeNode>& nodes() const { return nodes_; }

 private:
  std::vector<KnowledgeNode> nodes_;
  std::map<std::string, std::size_t> index_;  // lowercased entity -> position
};

KnowledgeGraph load_graph(const std::string& path);
KnowledgeGraph graph_from_json(const nlohmann::json& j);
nlohmann::json to_json(const KnowledgeGraph& graph);
nlohmann::json to_json(const KnowledgeNode& node);

// Default PPGL graph shipped with the repository (data/default_graph.json
// mirrors this content; a test keeps them in sync).
KnowledgeGraph default_graph();

// Syndrome alerts from mutation confidences: VHL confidence >= threshold
// raises a VHLSyndrome alert, RET raises MEN2. Inclusive comparison; VHL
// alert ordered before MEN2. Genes absent from the map raise nothing.
std::vector<RiskAlert> evaluate_alerts(const KnowledgeGraph& graph,
                                       const std::map<std::string, double>& mutation_confidences,
                                       const LabPanel& labs, double alert_threshold);

// Phenotype from plasma metanephrines (ULN multiples): metanephrine above
// 1.0 wins, then normetanephrine; everything at or below 1.0 is
// non-functioning (isolated 3-methoxytyramine elevation included).
CatecholamineType catecholamine_phenotype(const LabPanel& labs);

}  // namespace ppgl
