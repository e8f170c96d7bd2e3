#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "bbm/engine.hpp"
#include "bbm/harness.hpp"
#include "bbm/model.hpp"
#include "json.hpp"

namespace bbm {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kEngineVersion = "bbm-engine 1.0.0";
inline constexpr const char* kOutputDirEnv = "BBM_OUTPUT_DIR";

// 17 significant digits, so every double round-trips.
std::string fmt17(double v);

// TOML config: schema_version = 1 plus [model], [simulation], [barrier].
// Unknown keys are schema violations.
SimConfig parse_sim_config(const std::string& toml_text);
SimConfig load_sim_config(const std::filesystem::path& path);
OffspringLaw parse_offspring(const std::string& spec);  // "binary" or "0:0.25,2:0.75"

// One row per (replicate, record).
void write_records_header(std::ostream& os);
void write_records_csv(std::ostream& os, const ReplicateResult& r);
// Reads records back into results with seed, replicate and records filled.
std::vector<ReplicateResult> read_records_csv(std::istream& is);

void write_hits_jsonl(std::ostream& os, const ReplicateResult& r);

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);

struct RunManifest {
  std::string subcommand;
  std::uint64_t config_hash = 0;
  std::uint64_t master_seed = 0;
  std::uint64_t replicate_first = 0;
  std::uint64_t replicate_count = 0;
  std::vector<std::string> outputs;
  std::string version = kEngineVersion;
};

nlohmann::ordered_json to_json(const RunManifest& m);

nlohmann::ordered_json to_json(const ZinfErrorBudget& b);
nlohmann::ordered_json to_json(const TailTable& t);
nlohmann::ordered_json to_json(const MuZEstimate& m);
nlohmann::ordered_json to_json(const EcfComparison& e);
nlohmann::ordered_json to_json(const WtReport& w);
nlohmann::ordered_json to_json(const SpeedReport& s);
nlohmann::ordered_json to_json(const NGoodReport& n);

// Writes text atomically enough for our purposes; refuses to overwrite unless allowed.
void write_text(const std::filesystem::path& path, const std::string& text, bool overwrite);
std::string dump_json(const nlohmann::ordered_json& j);

}  // namespace bbm
