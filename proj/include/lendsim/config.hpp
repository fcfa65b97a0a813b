#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "lendsim/harness.hpp"

namespace lendsim {

inline constexpr std::string_view kVersion = "1.0.0";

// Used when a config omits the population size or run count. Full-scale
// values are one flag away (see applyFullScale).
inline constexpr std::size_t kDeskUsers = 200;
inline constexpr std::size_t kDeskRuns = 50;
inline constexpr std::size_t kFullScaleUsers = 1000;
inline constexpr std::size_t kFullScaleRuns = 1000;

inline constexpr double kDefaultPairVolume = 1e9;

struct ConfigFile {
    ScenarioConfig scenario;
    SweepSpec sweep = SweepSpec::defaults();
};

/// Parses and validates a config document. Relative paths inside it resolve
/// against `baseDir`. Every problem is reported as ConfigError naming the
/// offending key.
ConfigFile parseConfig(const nlohmann::json& doc, const std::filesystem::path& baseDir = {});
ConfigFile parseConfigText(std::string_view text, const std::filesystem::path& baseDir = {});
ConfigFile loadConfig(const std::filesystem::path& path);

/// Fully resolved echo of a config; parsing it yields the same scenario.
nlohmann::json configToJson(const ConfigFile& config);

void applyFullScale(ScenarioConfig& scenario);

std::string_view priceSourceName(PriceSource source);

}  // namespace lendsim
