#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "placeopt/acquisition.hpp"
#include "placeopt/cost_model.hpp"
#include "placeopt/dp_optimizer.hpp"
#include "placeopt/landscape_analysis.hpp"
#include "placeopt/records.hpp"
#include "placeopt/speculative.hpp"
#include "placeopt/surrogate.hpp"
#include "placeopt/synthetic_oracle.hpp"

namespace placeopt::io {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Keys sorted, no whitespace. Identical values give identical text.
std::string canonical_dump(const json& value);

/// 16 hex digits of FNV-1a over canonical_dump(value).
std::string content_hash(const json& value);

/// Adds schema_version and config_hash to an artifact object.
json stamp(json artifact, const json& config);

/// Checks schema_version; throws ValidationError on mismatch.
void check_schema(const json& artifact, const std::string& what);

json read_json_file(const std::string& path);
/// Writes pretty-printed JSON followed by a newline.
void write_json_file(const std::string& path, const json& value);

// Throughput records: {"counts": {"<type>": int, ...}, "throughput": float}
std::vector<ThroughputRecord> read_throughput_records(std::istream& in, const MixerCatalog& catalog);
std::vector<ThroughputRecord> read_throughput_records(const std::string& path, const MixerCatalog& catalog);
void write_throughput_records(std::ostream& out, std::span<const ThroughputRecord> records,
                              const MixerCatalog& catalog);

json cost_model_to_json(const CostModel& model, const MixerCatalog& catalog);
CostModel cost_model_from_json(const json& j, const MixerCatalog& catalog);

// Evaluation records: {"placement": "<codes>", "score": float, "checkpoint": str?, "cost": float?}
std::vector<EvaluationRecord> read_records(std::istream& in, const MixerCatalog& catalog);
std::vector<EvaluationRecord> read_records(const std::string& path, const MixerCatalog& catalog);
void write_records(std::ostream& out, std::span<const EvaluationRecord> records, const MixerCatalog& catalog);
void write_records(const std::string& path, std::span<const EvaluationRecord> records,
                   const MixerCatalog& catalog);

json expansion_to_json(const ExpansionConfig& config);
ExpansionConfig expansion_from_json(const json& j);

json posterior_to_json(const SurrogatePosterior& posterior, const MixerCatalog& catalog);
SurrogatePosterior posterior_from_json(const json& j, const MixerCatalog& catalog);

json potentials_to_json(const MRFPotentials& potentials);
MRFPotentials potentials_from_json(const json& j);

json frontier_to_json(std::span<const ParetoPoint> frontier, const MixerCatalog& catalog);
std::vector<ParetoPoint> frontier_from_json(const json& j, const MixerCatalog& catalog);
json pareto_point_to_json(const ParetoPoint& point, const MixerCatalog& catalog);

json landscape_to_json(const SyntheticLandscape& landscape);
SyntheticLandscape landscape_from_json(const json& j);

// Traces: {"prompt_id": str, "tokens": [{"logq": float, "logp": float}, ...], "target_generated": true}
std::vector<Trace> read_traces(std::istream& in);
std::vector<Trace> read_traces(const std::string& path);

json estimate_to_json(const AcceptanceEstimate& estimate);
json draft_search_to_json(const DraftSearchResult& result, const MixerCatalog& catalog);

json stability_to_json(const StabilityReport& report);
/// One CSV per curve family, keyed by a short name ("rho", "w", "window_all", "overlap").
std::vector<std::pair<std::string, std::string>> stability_to_csv(const StabilityReport& report);

}  // namespace placeopt::io
