#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include <nlohmann/json_fwd.hpp>

#include "ppgl/case_model.hpp"

namespace ppgl {

enum class Swarm { WSI, Gene, Table };

// Micro-tasks, one per swarm capability. Order is load-bearing: it defines
// the action encoding and the feature layout.
enum class SubTask {
  HistPattern = 0,
  Necrosis = 1,
  Invasion = 2,
  Cellularity = 3,
  Ki67 = 4,
  MutConfSDHB = 5,
  MutConfVHL = 6,
  MutConfRET = 7,
  CatecholaminePhenotype = 8,
  LabSummary = 9,
};

inline constexpr int kSubTaskCount = 10;
inline constexpr int kSwarmCount = 3;

std::string to_string(Swarm s);
std::string to_string(SubTask t);

// Static capability map: the one swarm that can answer a task.
Swarm task_swarm(SubTask t);

struct Action {
  bool emit_report = false;
  Swarm swarm = Swarm::WSI;
  SubTask task = SubTask::HistPattern;

  static Action call(Swarm s, SubTask t) { return Action{false, s, t}; }
  static Action emit() { return Action{true, Swarm::WSI, SubTask::HistPattern}; }

  bool operator==(const Action&) const = default;
};

// Dense action indexing for the policy: swarm*kSubTaskCount + task for
// calls, then one trailing emit action.
inline constexpr int kActionCount = kSwarmCount * kSubTaskCount + 1;
int action_index(const Action& a);
Action action_from_index(int index);

struct ErrorPayload {
  std::string message;
  bool operator==(const ErrorPayload&) const = default;
};
struct ReportRequested {
  bool operator==(const ReportRequested&) const = default;
};

// Payload variant; which alternative is legal is fixed by the task.
using ObservationPayload = std::variant<HistologicPattern,  // HistPattern
                                        bool,               // Necrosis / Invasion
                                        double,             // Cellularity / Ki67 / MutConf*
                                        CatecholamineType,  // CatecholaminePhenotype
                                        std::string,        // LabSummary
                                        ErrorPayload,       // malformed call
                                        ReportRequested>;   // terminal marker

struct Observation {
  SubTask task = SubTask::HistPattern;
  ObservationPayload payload;
  std::uint64_t noise_seed_used = 0;

  bool is_error() const { return std::holds_alternative<ErrorPayload>(payload); }
  bool is_report_request() const { return std::holds_alternative<ReportRequested>(payload); }

  bool operator==(const Observation&) const = default;
};

// Canonical full-precision rendering, used for audit digests and replay
// equality checks.
std::string payload_digest(const ObservationPayload& payload);

// Signed additive reward decomposition: malformed and redundant calls carry
// negative parts. Parts always sum to the step reward exactly.
struct RewardParts {
  double diag = 0.0;
  double format_penalty = 0.0;      // 0 or -lambda1
  double redundancy_penalty = 0.0;  // 0 or -lambda2

  double total() const { return diag + format_penalty + redundancy_penalty; }

  bool operator==(const RewardParts&) const = default;
};

// One step of an episode history; reports carry these verbatim as the
// evidence trail.
struct TrailEntry {
  int step_index = 0;
  Action action;
  Observation observation;

  bool operator==(const TrailEntry&) const = default;
};

nlohmann::json to_json(const Action& a);
Action action_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Observation& o);
Observation observation_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrailEntry& e);

}  // namespace ppgl
