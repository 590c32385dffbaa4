#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "pdiv/levy_model.hpp"

namespace pdiv {

/// A model plus the control parameters (q, r, beta).
struct ProblemConfig {
    std::string name;
    LevyModel model;
    double q = 0.05;
    double r = 0.5;
    double beta = 1.5;
    /// Canonical JSON of the resolved configuration (presets expanded).
    std::string canonical;
};

std::string_view library_version() noexcept;

/// The shipped 6-phase Erlang-mixture fit to the folded standard normal.
PhaseTypeDistribution folded_normal_ph6();

/// Named presets: "case1" (sigma = 0.2, c = 1, beta = 1.5) and
/// "case2" (sigma = 0, c = 0.3, beta = 1.05); both with r = 0.5, q = 0.05,
/// unit jump rate and the folded-normal fit.
ProblemConfig preset(std::string_view name);

/// Parse a JSON configuration document; see docs/config.md for the schema.
/// Throws Error(InvalidConfig) on schema violations and
/// Error(UnsupportedModel) for Levy measures other than phase-type jumps.
ProblemConfig parse_config(std::string_view text);
ProblemConfig load_config(const std::string& path);

/// 64-bit FNV-1a of the canonical JSON, as 16 hex digits.
std::string config_hash(const ProblemConfig& config);

}  // namespace pdiv
