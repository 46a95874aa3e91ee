#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "loopflow/flow.hpp"
#include "loopflow/simulate.hpp"

namespace loopflow {

/// Time-domain verification settings for the synthesized design.
struct VerifySettings {
    Nonlinearity    nonlinearity = Identity{};
    double          horizon = 60.0;
    double          step = 1e-3;
    Eigen::VectorXd references;  // one per output
};

/// A parsed, validated design run: the problem, the verification settings and
/// the normalized document (all defaults filled) that reproduces them.
struct RunConfig {
    DesignProblem         problem;
    VerifySettings        verify;
    std::string           output_dir = "out";
    nlohmann::ordered_json normalized;

    bool operator==(const RunConfig& other) const { return normalized == other.normalized; }
};

/// Parses a JSON config document. Relative gridmask paths resolve against
/// `base_dir`. Throws SchemaError naming the offending key path, or
/// FileNotFound for missing mask files.
RunConfig parse_config(const std::string& text, const std::string& base_dir = ".");

/// Reads and parses a config file; mask paths resolve against its directory.
RunConfig load_config(const std::string& path);

/// Normalized JSON text; parse(serialize(c)) compares equal to c.
std::string serialize_config(const RunConfig& config);

}  // namespace loopflow
