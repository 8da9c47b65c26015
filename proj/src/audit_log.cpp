#include "ppgl/audit_log.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ppgl {

using nlohmann::json;

json to_json(const AuditRecord& r) {
  return json{{"run_id", r.run_id},
              {"case_id", r.case_id},
              {"step_index", r.step_index},
              {"action", to_json(r.action)},
              {"observation_digest", r.observation_digest},
              {"reward_total", r.reward_total},
              {"reward_parts",
               json{{"diag", r.reward_parts.diag},
                    {"format_penalty", r.reward_parts.format_penalty},
                    {"redundancy_penalty", r.reward_parts.redundancy_penalty}}},
              {"timestamp", r.timestamp}};
}

AuditRecord audit_record_from_json(const json& j) {
  AuditRecord r;
  r.run_id = j.at("run_id").get<std::string>();
  r.case_id = j.at("case_id").get<std::string>();
  r.step_index = j.at("step_index").get<int>();
  r.action = action_from_json(j.at("action"));
  r.observation_digest = j.at("observation_digest").get<std::string>();
  r.reward_total = j.at("reward_total").get<double>();
  const json& parts = j.at("reward_parts");
  r.reward_parts.diag = parts.at("diag").get<double>();
  r.reward_parts.format_penalty = parts.at("format_penalty").get<double>();
  r.reward_parts.redundancy_penalty = parts.at("redundancy_penalty").get<double>();
  r.timestamp = j.at("timestamp").get<std::uint64_t>();
  return r;
}

void AuditLog::append(AuditRecord record) {
  if (record.reward_parts.total() != record.reward_total)
    throw std::invalid_argument("audit append: reward_parts do not sum to reward_total");
  if (record.run_id.empty() || record.case_id.empty())
    throw std::invalid_argument("audit append: run_id and case_id must be non-empty");
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (it->run_id == record.run_id && it->case_id == record.case_id) {
      if (record.step_index <= it->step_index)
        throw std::invalid_argument("audit append: step_index must be strictly increasing per episode");
      break;
    }
  }
  record.timestamp = static_cast<std::uint64_t>(records_.size());
  records_.push_back(std::move(record));
}

std::vector<AuditRecord> AuditLog::replay(const std::string& run_id,
                                          const std::string& case_id) const {
  std::vector<AuditRecord> out;
  for (const AuditRecord& r : records_)
    if (r.run_id == run_id && r.case_id == case_id) out.push_back(r);
  return out;  // append order == step order by the append invariant
}

void AuditLog::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("audit save: cannot open " + path);
  for (const AuditRecord& r : records_) out << to_json(r).dump() << '\n';
  if (!out) throw std::runtime_error("audit save: write failed");
}

AuditLog AuditLog::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("audit load: cannot open " + path);
  AuditLog log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      AuditRecord r = audit_record_from_json(json::parse(line));
      const std::uint64_t timestamp = r.timestamp;
      log.append(std::move(r));
      log.records_.back().timestamp = timestamp;  // preserve persisted counters
    } catch (const std::exception& e) {
      throw std::runtime_error("audit load: " + path + " line " + std::to_string(line_no) + ": " +
                               e.what());
    }
  }
  return log;
}

std::vector<AuditRecord> audit_records_from_trace(const std::string& run_id,
                                                  const EpisodeTrace& trace) {
  std::vector<AuditRecord> records;
  records.reserve(trace.steps.size());
  for (const TraceStep& step : trace.steps) {
    AuditRecord r;
    r.run_id = run_id;
    r.case_id = trace.case_id;
    r.step_index = step.entry.step_index;
    r.action = step.entry.action;
    r.observation_digest = payload_digest(step.entry.observation.payload);
    r.reward_parts = step.reward;
    r.reward_total = step.reward.total();
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace ppgl
