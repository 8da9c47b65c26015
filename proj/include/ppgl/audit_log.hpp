#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ppgl/swarm_env.hpp"
#include "ppgl/swarm_types.hpp"

namespace ppgl {

// One auditable step: what was called, what came back (as a canonical
// digest), and the exact reward decomposition. Timestamps are a logical
// counter assigned at append time.
struct AuditRecord {
  std::string run_id;
  std::string case_id;
  int step_index = 0;
  Action action;
  std::string observation_digest;
  double reward_total = 0.0;
  RewardParts reward_parts;
  std::uint64_t timestamp = 0;

  bool operator==(const AuditRecord&) const = default;
};

nlohmann::json to_json(const AuditRecord& record);
AuditRecord audit_record_from_json(const nlohmann::json& j);

// Append-only log. Appends reject records whose parts do not sum to
// reward_total exactly or whose step_index does not increase within a
// (run_id, case_id) episode.
class AuditLog {
 public:
  void append(AuditRecord record);

  const std::vector<AuditRecord>& records() const { return records_; }

  // Records of one episode, in step order.
  std::vector<AuditRecord> replay(const std::string& run_id, const std::string& case_id) const;

  void save(const std::string& path) const;  // line-delimited JSON
  static AuditLog load(const std::string& path);

 private:
  std::vector<AuditRecord> records_;
};

// Expands an episode trace into audit records (timestamps assigned by the
// log on append).
std::vector<AuditRecord> audit_records_from_trace(const std::string& run_id,
                                                  const EpisodeTrace& trace);

}  // namespace ppgl
