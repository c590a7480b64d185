#pragma once

#include "sslab/demand.hpp"
#include "sslab/estimator.hpp"
#include "sslab/harness.hpp"
#include "sslab/oracle.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace sslab {

// Fully resolved run configuration. Built from defaults_json() merged with a
// user file and dotted overrides; every key must already exist in the
// defaults except inside free-form sections (system, design, grid contexts,
// estimator overrides, mc systems, fd).
struct RunConfig {
    nlohmann::json resolved;
    std::uint64_t seed = 0;
    nlohmann::json system;
    Design design;
    std::size_t n = 0;
    bool endogenous = false;
    ControlMode control = ControlMode::Estimated;
    std::vector<ChannelMode> channels;
    ChannelMode test_channel = ChannelMode::StableComposition;
    GridDesign grid;
    std::optional<FdScheme> fd;
    OracleSettings oracle;
    KernelProviderSettings estimator;
    int B = 199;
    std::string output_dir;
    double oracle_verify_tolerance = 2e-3;
    McConfig mc;

    // FNV-1a of the compact dump of `resolved` without output_dir.
    std::string hash() const;
};

nlohmann::json defaults_json();

// Applies `key=value` with a dotted key; the value is parsed as JSON when it
// parses, otherwise taken as a string.
void apply_override(nlohmann::json& config, const std::string& assignment);

// Throws ConfigError for unknown keys, wrong types or a missing seed.
RunConfig resolve_config(const nlohmann::json& user, const std::vector<std::string>& overrides = {});
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

} // namespace sslab
