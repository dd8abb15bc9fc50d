#pragma once

// Runtime diagnostics for the bounded-perturbation and trajectory-deviation
// bounds, the stealth set, and margin statistics.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qfl/aggregators.hpp"
#include "qfl/batch.hpp"
#include "qfl/hybrid_model.hpp"
#include "qfl/rng.hpp"

namespace qfl::analysis {

/// {u : ||u|| <= radius, cos(u, center) >= kappa}
struct StealthSetParams {
    std::vector<double> center;
    double radius = 0.0;
    double kappa = 0.0;
};

struct StealthCheck {
    bool member = false;
    double norm = 0.0;
    double cosine = 0.0;
    bool cosine_vacuous = false;  // zero center (or zero u): cosine clause passes
};

StealthCheck stealth_membership(std::span<const double> u, const StealthSetParams& params);

/// Scales v down to norm r when it is longer.
void clip_to_radius(std::vector<double>& v, double r);

struct Lemma1Result {
    double b_norm = 0.0;
    double bound = 0.0;  // q * r
    bool pass = true;
};

/// ||sum_a w_a delta_a|| against q * r (weights used as given), tol 1e-9.
Lemma1Result lemma1_check(std::span<const agg::ClientUpdate> malicious, double r, double q);

struct Prop1Report {
    std::vector<double> residuals;  // lhs - rhs per round; <= tol means the round holds
    double max_residual = 0.0;
    std::size_t violations = 0;
    bool skipped = false;
};

/// dev[t+1] <= (1 + beta L) dev[t] + beta ||b^t|| + tol for every round.
/// `deviations` has one more entry than `b_norms` (round 0 included).
Prop1Report proposition1_check(std::span<const double> deviations, std::span<const double> b_norms, double L,
                               double beta, double tol = 1e-8);

/// sum_t (1 + beta L)^{T-1-t} beta ||b^t|| for T = 1..|b_norms|.
std::vector<double> unrolled_deviation_bound(std::span<const double> b_norms, double L, double beta);

/// Top logit minus runner-up (0 on a tie at the top).
double margin(std::span<const double> logits);

struct MarginStats {
    std::vector<double> margins;
    double lipschitz = 0.0;
    double drift = 0.0;
    double band_fraction = 0.0;
};

MarginStats margin_distribution(const model::ModelParams& params, const qsim::CircuitTemplate& circuit,
                                const Batch& test);

struct Theorem1Stats {
    double lipschitz = 0.0;      // L_f estimate
    double drift = 0.0;          // ||theta_attacked - theta_clean||
    double band_fraction = 0.0;  // P(margin_clean <= 2 L_f drift)
    double flip_fraction = 0.0;  // P(pred_clean != pred_attacked)
};

/// L_f = max over pairs and test points of ||f_a(x) - f_b(x)||_inf / ||a - b||;
/// pairs with zero distance are skipped.
double estimate_output_lipschitz(std::span<const std::pair<std::vector<double>, std::vector<double>>> pairs,
                                 const model::ParamManifest& manifest, const qsim::CircuitTemplate& circuit,
                                 const Batch& test);

Theorem1Stats theorem1_statistics(const model::ModelParams& clean, const model::ModelParams& attacked,
                                  const qsim::CircuitTemplate& circuit, const Batch& test,
                                  std::span<const std::pair<std::vector<double>, std::vector<double>>> pairs);

/// Empirical smoothness: max ||grad F(a) - grad F(b)|| / ||a - b|| over pairs,
/// with grad F the mean-loss gradient on `data`.
double estimate_smoothness(std::span<const std::pair<std::vector<double>, std::vector<double>>> pairs,
                           const model::ParamManifest& manifest, const qsim::CircuitTemplate& circuit,
                           const Batch& data);

/// Signed baseline - attacked, in percentage points.
double accuracy_drop(double baseline_acc, double attacked_acc);

/// F(theta) = 1/2 sum_k w_k ||A_k theta - c_k||^2 with L = lambda_max(sum_k w_k A_k^T A_k).
struct QuadraticObjective {
    std::vector<Eigen::MatrixXd> a;
    std::vector<Eigen::VectorXd> c;
    std::vector<double> weights;

    static QuadraticObjective random(int clients, int dim, int rows, Rng& rng);

    int clients() const noexcept { return static_cast<int>(a.size()); }
    int dim() const noexcept { return a.empty() ? 0 : static_cast<int>(a.front().cols()); }
    double smoothness() const;
    Eigen::VectorXd client_gradient(int k, const Eigen::VectorXd& theta) const;
};

struct QuadraticRun {
    std::vector<double> deviations;  // ||theta^t - theta_ben^t||, t = 0..T
    std::vector<double> b_norms;     // ||b^t||, t = 0..T-1
    double L = 0.0;
};

/// FedAvg on the quadratic objective with one local gradient step of size
/// `client_lr` per round. Clients in `malicious` hold no local objective in the
/// attack-free twin (they send zero) and send a random perturbation of norm
/// <= `radius` in the attacked run.
QuadraticRun run_quadratic_federation(const QuadraticObjective& objective, std::span<const int> malicious,
                                      int rounds, double client_lr, double beta, double radius, Rng& rng);

}  // namespace qfl::analysis
