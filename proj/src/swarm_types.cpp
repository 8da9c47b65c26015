#include "ppgl/swarm_types.hpp"

#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ppgl {

using nlohmann::json;

std::string to_string(Swarm s) {
  switch (s) {
    case Swarm::WSI: return "wsi";
    case Swarm::Gene: return "gene";
    case Swarm::Table: return "table";
  }
  throw std::invalid_argument("unknown swarm");
}

std::string to_string(SubTask t) {
  switch (t) {
    case SubTask::HistPattern: return "hist_pattern";
    case SubTask::Necrosis: return "necrosis";
    case SubTask::Invasion: return "invasion";
    case SubTask::Cellularity: return "cellularity";
    case SubTask::Ki67: return "ki67";
    case SubTask::MutConfSDHB: return "mut_conf_sdhb";
    case SubTask::MutConfVHL: return "mut_conf_vhl";
    case SubTask::MutConfRET: return "mut_conf_ret";
    case SubTask::CatecholaminePhenotype: return "catecholamine_phenotype";
    case SubTask::LabSummary: return "lab_summary";
  }
  throw std::invalid_argument("unknown subtask");
}

Swarm task_swarm(SubTask t) {
  const int i = static_cast<int>(t);
  if (i <= static_cast<int>(SubTask::Ki67)) return Swarm::WSI;
  if (i <= static_cast<int>(SubTask::MutConfRET)) return Swarm::Gene;
  return Swarm::Table;
}

int action_index(const Action& a) {
  if (a.emit_report) return kActionCount - 1;
  return static_cast<int>(a.swarm) * kSubTaskCount + static_cast<int>(a.task);
}

Action action_from_index(int index) {
  if (index < 0 || index >= kActionCount)
    throw std::invalid_argument("action_from_index: index out of range");
  if (index == kActionCount - 1) return Action::emit();
  return Action::call(static_cast<Swarm>(index / kSubTaskCount),
                      static_cast<SubTask>(index % kSubTaskCount));
}

std::string payload_digest(const ObservationPayload& payload) {
  std::ostringstream out;
  out.precision(17);
  if (const auto* p = std::get_if<HistologicPattern>(&payload)) {
    out << "pattern=" << to_string(*p);
  } else if (const auto* b = std::get_if<bool>(&payload)) {
    out << "flag=" << (*b ? "true" : "false");
  } else if (const auto* d = std::get_if<double>(&payload)) {
    out << "value=" << *d;
  } else if (const auto* c = std::get_if<CatecholamineType>(&payload)) {
    out << "phenotype=" << to_string(*c);
  } else if (const auto* s = std::get_if<std::string>(&payload)) {
    out << "text=" << *s;
  } else if (const auto* e = std::get_if<ErrorPayload>(&payload)) {
    out << "error=" << e->message;
  } else {
    out << "report_requested";
  }
  return out.str();
}

json to_json(const Action& a) {
  if (a.emit_report) return json{{"type", "emit_report"}};
  return json{{"type", "call"}, {"swarm", to_string(a.swarm)}, {"task", to_string(a.task)}};
}

namespace {

Swarm swarm_from_string(const std::string& s) {
  if (s == "wsi") return Swarm::WSI;
  if (s == "gene") return Swarm::Gene;
  if (s == "table") return Swarm::Table;
  throw std::invalid_argument("unknown swarm '" + s + "'");
}

SubTask task_from_string(const std::string& s) {
  for (int i = 0; i < kSubTaskCount; ++i) {
    if (to_string(static_cast<SubTask>(i)) == s) return static_cast<SubTask>(i);
  }
  throw std::invalid_argument("unknown subtask '" + s + "'");
}

}  // namespace

Action action_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "emit_report") return Action::emit();
  if (type != "call") throw std::invalid_argument("action: unknown type '" + type + "'");
  return Action::call(swarm_from_string(j.at("swarm").get<std::string>()),
                      task_from_string(j.at("task").get<std::string>()));
}

json to_json(const Observation& o) {
  json payload;
  if (const auto* p = std::get_if<HistologicPattern>(&o.payload)) {
    payload = json{{"kind", "pattern"}, {"value", to_string(*p)}};
  } else if (const auto* b = std::get_if<bool>(&o.payload)) {
    payload = json{{"kind", "flag"}, {"value", *b}};
  } else if (const auto* d = std::get_if<double>(&o.payload)) {
    payload = json{{"kind", "value"}, {"value", *d}};
  } else if (const auto* c = std::get_if<CatecholamineType>(&o.payload)) {
    payload = json{{"kind", "phenotype"}, {"value", to_string(*c)}};
  } else if (const auto* s = std::get_if<std::string>(&o.payload)) {
    payload = json{{"kind", "text"}, {"value", *s}};
  } else if (const auto* e = std::get_if<ErrorPayload>(&o.payload)) {
    payload = json{{"kind", "error"}, {"value", e->message}};
  } else {
    payload = json{{"kind", "report_requested"}};
  }
  return json{{"task", to_string(o.task)}, {"payload", payload}, {"noise_seed_used", o.noise_seed_used}};
}

json to_json(const TrailEntry& e) {
  return json{{"step_index", e.step_index}, {"action", to_json(e.action)},
              {"observation", to_json(e.observation)}};
}

Observation observation_from_json(const json& j) {
  Observation o;
  o.task = task_from_string(j.at("task").get<std::string>());
  o.noise_seed_used = j.at("noise_seed_used").get<std::uint64_t>();
  const json& payload = j.at("payload");
  const std::string kind = payload.at("kind").get<std::string>();
  if (kind == "pattern") {
    o.payload = pattern_from_string(payload.at("value").get<std::string>());
  } else if (kind == "flag") {
    o.payload = payload.at("value").get<bool>();
  } else if (kind == "value") {
    o.payload = payload.at("value").get<double>();
  } else if (kind == "phenotype") {
    o.payload = catecholamine_from_string(payload.at("value").get<std::string>());
  } else if (kind == "text") {
    o.payload = payload.at("value").get<std::string>();
  } else if (kind == "error") {
    o.payload = ErrorPayload{payload.at("value").get<std::string>()};
  } else if (kind == "report_requested") {
    o.payload = ReportRequested{};
  } else {
    throw std::invalid_argument("observation: unknown payload kind '" + kind + "'");
  }
  return o;
}

}  // namespace ppgl
