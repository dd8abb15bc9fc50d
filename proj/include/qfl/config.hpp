#pragma once

// Flat key=value configuration.
//
//   # comment
//   federation.clients = 5
//   attack.kind = grover
//   grid.q_values = 0, 0.2
//
// Keys carry a section prefix (federation, model, attack, crafting, defense,
// dataset, analysis, grid). Unknown keys are rejected.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "qfl/federation.hpp"

namespace qfl::config {

using ConfigMap = std::map<std::string, std::string>;

/// Parses key=value text. Throws ConfigError with the line number on a
/// malformed line or a duplicate key.
ConfigMap parse_text(std::string_view text);
ConfigMap parse_file(const std::filesystem::path& path);

/// Every recognised key.
const std::vector<std::string>& known_keys();

struct ExperimentGrid {
    std::vector<attacks::AttackKind> attacks;
    std::vector<agg::Rule> defenses;
    std::vector<double> q_values;
    std::vector<double> rho_values;
    std::vector<std::uint64_t> seeds;
    int jobs = 1;

    std::size_t cell_count() const { return attacks.size() * defenses.size() * q_values.size() * rho_values.size(); }
};

struct Settings {
    fed::FederationConfig base;
    ExperimentGrid grid;
};

/// Desk profile defaults overlaid with `kv`. Grid lists default to the single
/// base value; seeds default to seed .. seed + num_seeds - 1.
Settings build_settings(const ConfigMap& kv);

/// Paper-scale profile keys (K=20, T=100, five seeds, client lr 1e-3).
ConfigMap paper_scale_overrides();

/// Effective configuration, one entry per known key (grid included).
ConfigMap echo(const Settings& s);

/// Lists.
std::vector<std::string> split_list(std::string_view text);
std::string format_double(double v);

}  // namespace qfl::config
