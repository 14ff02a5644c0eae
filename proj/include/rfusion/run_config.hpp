#pragma once

// Pipeline configuration shared by the CLI subcommands. Loaded from JSON;
// absent keys keep their defaults, unknown keys are rejected.

#include <cstdint>
#include <optional>

#include "json.hpp"
#include "rfusion/degeneracy.hpp"
#include "rfusion/scenario.hpp"
#include "rfusion/supervisor.hpp"
#include "rfusion/traj_eval.hpp"

namespace rfusion {

struct RunConfig {
  std::optional<sim::Scenario> scenario;  // for `simulate`
  DetectorConfig detector;
  SupervisorConfig supervisor;
  HealthSource health_source = HealthSource::kDetector;
  EvalOptions evaluation;
  std::uint64_t seed = 7;

  // Throws std::invalid_argument.
  void validate() const;
};

// Throws std::invalid_argument on unknown keys, wrong types or invalid values.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const RunConfig& c);

}  // namespace rfusion
