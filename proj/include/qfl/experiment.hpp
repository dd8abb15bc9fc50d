#pragma once

// Grid execution with cached attack-free baselines, and result files.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qfl/config.hpp"
#include "qfl/federation.hpp"

namespace qfl::experiment {

struct SeedRun {
    std::uint64_t seed = 0;
    fed::ExperimentResult result;
    double baseline_final_accuracy = 0.0;  // same defense and seed, q = 0
};

struct CellResult {
    attacks::AttackKind attack = attacks::AttackKind::None;
    agg::Rule defense = agg::Rule::FedAvg;
    double q = 0.0;
    double rho = 0.0;
    std::vector<SeedRun> runs;
    std::string error;  // non-empty when the cell failed
};

struct GridResult {
    std::string dataset;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    std::vector<CellResult> cells;  // declaration order: attack, defense, q, rho
};

/// Config of one grid cell and seed.
fed::FederationConfig cell_config(const fed::FederationConfig& base, attacks::AttackKind attack, agg::Rule defense,
                                  double q, double rho, std::uint64_t seed);

/// One run per cell and seed, with the q = 0 baseline of each (defense, seed)
/// and, when analysis.shadow is on, the attack-free twin of each run. Twins
/// and baselines are shared whenever their trajectories coincide. A failing
/// cell records its error and the grid continues.
GridResult run_grid(const config::Settings& settings, const data::Split& data);

struct SummaryRow {
    std::string dataset;
    attacks::AttackKind attack = attacks::AttackKind::None;
    agg::Rule defense = agg::Rule::FedAvg;
    double q = 0.0;
    double rho = 0.0;
    std::size_t seeds = 0;
    std::size_t rows = 0;
    double accuracy_mean = 0.0;
    double accuracy_std = 0.0;
    double loss_mean = 0.0;
    double final_accuracy_mean = 0.0;
    double final_accuracy_std = 0.0;
    double baseline_accuracy_mean = 0.0;
    double accuracy_drop = 0.0;
    std::optional<double> deviation_mean;
    double b_norm_mean = 0.0;
    std::string status;
};

std::vector<SummaryRow> summarize(const GridResult& grid);

inline constexpr const char* kResultsHeader = "round,seed,dataset,attack,defense,q,rho,accuracy,loss,deviation,b_norm";

/// Writes results.csv, summary.csv, manifest.json and rounds.jsonl into
/// `out_dir` (created if missing). Throws std::runtime_error naming the path
/// on an IO failure.
void emit_results(const GridResult& grid, const config::Settings& settings, const std::filesystem::path& out_dir);

}  // namespace qfl::experiment
