#pragma once

// JSON scenario documents. Field names mirror the domain types; unknown keys
// are rejected so that typos do not silently fall back to defaults.

#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "rec/core.hpp"

namespace rec {

class ScenarioFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Scenario scenario_from_json(const nlohmann::json& doc);
nlohmann::json scenario_to_json(const Scenario& scenario);

Scenario load_scenario(const std::filesystem::path& path);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);

}  // namespace rec
