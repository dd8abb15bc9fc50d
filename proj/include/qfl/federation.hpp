#pragma once

// Synchronous federated training with full participation, an optional
// attack-free twin run, and per-round audit records.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qfl/aggregators.hpp"
#include "qfl/analysis.hpp"
#include "qfl/attacks.hpp"
#include "qfl/batch.hpp"
#include "qfl/crafting.hpp"
#include "qfl/datasets.hpp"
#include "qfl/hybrid_model.hpp"

namespace qfl::fed {

/// Attack settings before they are resolved against an architecture. Unset
/// optionals take the architecture defaults of AttackConfig::defaults.
struct AttackSettings {
    attacks::AttackKind kind = attacks::AttackKind::None;
    std::optional<std::vector<int>> omega;
    std::optional<std::vector<int>> wires;
    std::optional<std::vector<double>> alphas;
    int period = 3;
    int target_qubit = 0;
    int sign_qubit = 0;
    double phase = 3.14159265358979323846;
    double poison_prob = 0.9;
    double loss_scale = 2.0;
    std::optional<attacks::InsertionPoint> insertion;
    attacks::OracleImpl oracle = attacks::OracleImpl::Ancilla;

    attacks::AttackConfig resolve(const model::ModelArchitecture& arch) const;
};

struct AnalysisOptions {
    bool lemma1_clip = true;         // clip each malicious delta to r^t before aggregation
    double stealth_kappa = 0.0;
    bool shadow = true;              // run the attack-free twin for deviations
    int theorem1_pairs = 20;
    int smoothness_pairs = 5;
    std::size_t smoothness_subset = 64;
};

struct FederationConfig {
    int clients = 5;
    double malicious_fraction = 0.0;
    int rounds = 20;
    int local_epochs = 1;
    double client_lr = 0.01;
    double server_lr = 1.0;
    double dirichlet_alpha = 0.9;
    std::uint64_t seed = 1;
    int batch_size = 32;
    double weight_decay = 0.01;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    long shots = 0;
    int threads = 1;

    std::optional<int> depth;  // unset: 6 for MNIST-style data, 2 for CIFAR-10
    model::InitScales init;

    AttackSettings attack;
    crafting::CraftingConfig crafting;
    agg::Rule defense = agg::Rule::FedAvg;
    agg::RuleOptions defense_opts;
    data::DatasetSpec dataset;
    AnalysisOptions analysis;

    /// m = round(q K), at least one attacker whenever q > 0.
    int malicious_count() const;
    /// Throws ConfigError; prints a warning to stderr for q > 0.5.
    void validate() const;
    model::ModelArchitecture architecture(const Batch& train) const;
    /// A copy with every attack surface switched off.
    FederationConfig neutralized() const;
};

/// Per class, client shares ~ Dirichlet(alpha 1_K); indices split at the
/// cumulative shares. Redraws until every client holds a sample (then moves
/// samples from the largest client as a last resort).
std::vector<std::vector<std::size_t>> dirichlet_partition(std::span<const int> labels, int clients, double alpha,
                                                          Rng& rng);

/// Malicious ids: the first m entries of a seeded shuffle of 0..K-1, sorted.
std::vector<int> malicious_ids(int clients, int m, std::uint64_t seed);

struct ClientRecord {
    int client_id = 0;
    bool malicious = false;   // audit only; never passed to the aggregator
    int poisoned = 0;         // b_a^t
    bool faulted = false;
    bool clipped = false;
    double raw_norm = 0.0;
    double sent_norm = 0.0;
    std::optional<crafting::CraftTrace> craft;
};

struct RoundRecord {
    long round = 0;
    std::vector<double> benign_aggregate;  // g^t
    std::vector<double> perturbation;      // b^t
    std::vector<double> applied;           // AR output
    double g_norm = 0.0;
    double b_norm = 0.0;
    double applied_norm = 0.0;
    double decomposition_residual = 0.0;   // ||sum_k w_k delta_k - (g + b)||
    std::vector<ClientRecord> clients;
    double accuracy = 0.0;
    double loss = 0.0;
    std::optional<double> deviation;       // ||theta^{t+1} - theta_ben^{t+1}||
    double benign_norm_mean = 0.0;
    double benign_norm_std = 0.0;
    double radius = 0.0;                   // r^t = mean + 3 std of benign norms
    analysis::Lemma1Result lemma1;
    std::vector<analysis::StealthCheck> stealth;
    /// Crafted malicious norms inside mean +- 4 std of benign norms; unset
    /// when no crafted delta was sent this round.
    std::optional<bool> stealth_norm_ok;
    bool rejected = false;                 // non-finite aggregate, theta kept
};

struct ExperimentResult {
    FederationConfig config;
    model::ModelArchitecture arch;
    std::vector<int> malicious;
    std::vector<std::size_t> partition_sizes;
    double initial_accuracy = 0.0;
    double initial_loss = 0.0;
    std::vector<RoundRecord> rounds;
    std::vector<std::vector<double>> thetas;  // theta^0 .. theta^T
    std::optional<analysis::Prop1Report> prop1;
    double smoothness_estimate = 0.0;
    std::optional<analysis::Theorem1Stats> theorem1;

    double final_accuracy() const { return rounds.empty() ? initial_accuracy : rounds.back().accuracy; }
};

/// Runs T rounds. With `twin` (the attack-free trajectory of the same
/// config), each record carries its deviation and the trajectory-level
/// diagnostics are filled in.
ExperimentResult run_experiment(const FederationConfig& cfg, const data::Split& data,
                                const ExperimentResult* twin = nullptr);

struct ShadowPair {
    ExperimentResult attacked;
    ExperimentResult benign;
};

/// The attacked run and its attack-free twin (shared RNG streams).
ShadowPair shadow_benign_run(const FederationConfig& cfg, const data::Split& data);

}  // namespace qfl::fed
