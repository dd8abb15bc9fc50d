#pragma once

// Server-side aggregation rules. Every rule sees only (client_id, round,
// delta, weight); malicious flags never cross this boundary.

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qfl::agg {

struct ClientUpdate {
    int client_id = 0;
    long round = 0;
    std::vector<double> delta;
    double weight = 1.0;
};

/// Rescales weights to sum to one. Throws ProtocolError on an empty list,
/// a non-positive weight, or mismatched delta dimensions.
void normalize_weights(std::vector<ClientUpdate>& updates);

/// Weighted mean sum_k w_k delta_k (weights used as given).
std::vector<double> fedavg(std::span<const ClientUpdate> updates);

/// Krum scores: for each update, the sum of squared L2 distances to its
/// n - f - 2 nearest other updates. Returned in input order.
std::vector<double> krum_scores(std::span<const ClientUpdate> updates, int f);

/// Delta with the lowest Krum score (ties to the lowest client id).
/// Throws ConfigError unless n >= f + 3.
std::vector<double> krum(std::span<const ClientUpdate> updates, int f);

/// Client ids of the m lowest-score updates, ties to the lowest client id.
std::vector<int> multi_krum_selection(std::span<const ClientUpdate> updates, int f, int m_select);

/// Equal-weight mean of the m_select lowest-score deltas.
std::vector<double> multi_krum(std::span<const ClientUpdate> updates, int f, int m_select);

/// Per-client cumulative update sums for the history-based rules.
struct AggregatorState {
    std::map<int, std::vector<double>> history;
    long rounds_seen = 0;

    /// Adds each update's delta to its client's running sum.
    void accumulate(std::span<const ClientUpdate> updates);
};

/// FoolsGold weights from cumulative histories (published algorithm: pairwise
/// cosine similarity, pardoning, 1 - max similarity clipped to [0, 1],
/// rescale by the max, logit with confidence 1). Returned in input order.
/// Updates whose client has a zero history get weight 1 only if all do.
std::vector<double> foolsgold_weights(std::span<const ClientUpdate> updates, const AggregatorState& state);

/// Accumulates the round into `state`, then returns the FoolsGold-weighted
/// mean. Falls back to fedavg when any history is zero or all weights vanish.
std::vector<double> foolsgold(std::span<const ClientUpdate> updates, AggregatorState& state);

struct MudHogOptions {
    /// Minimum cosine distance between the two cluster centroids for the
    /// split to count; below it every client is kept.
    double min_separation = 0.5;
};

/// Two-means clustering (cosine distance) of long-term signatures. Returns
/// the cluster label of each update in input order, or an empty vector when
/// the signatures are degenerate or the split is below min_separation.
std::vector<int> mudhog_clusters(std::span<const ClientUpdate> updates, const AggregatorState& state,
                                 const MudHogOptions& opts);

/// Mud-HoG proxy: accumulates the round, clusters long-term signatures into
/// two groups and averages the larger one (both on an exact size tie).
std::vector<double> mudhog(std::span<const ClientUpdate> updates, AggregatorState& state,
                           const MudHogOptions& opts = {});

struct FlGuardianOptions {
    double z_threshold = 2.5;
    double min_cosine = 0.0;
};

/// Ids kept by the screening rule, ascending.
std::vector<int> flguardian_survivors(std::span<const ClientUpdate> updates, const FlGuardianOptions& opts);

/// FLGuardian proxy: coordinate-wise median center; drop clients whose norm
/// z-score exceeds the threshold or whose cosine to the center is negative;
/// weighted mean of survivors (the median itself when nothing survives).
std::vector<double> flguardian_screen(std::span<const ClientUpdate> updates, const FlGuardianOptions& opts = {});

std::vector<double> coordinate_median(std::span<const ClientUpdate> updates);

/// theta + beta * aggregate. Throws NumericFault (theta untouched) on a
/// non-finite aggregate, ShapeError on a dimension mismatch.
void server_apply(std::vector<double>& theta, std::span<const double> aggregate, double beta);

enum class Rule { FedAvg, Krum, MultiKrum, FoolsGold, MudHog, FlGuardian };

std::string_view to_string(Rule rule);
/// Name written to result files; approximated rules carry a "-proxy" suffix.
std::string_view record_name(Rule rule);
Rule parse_rule(std::string_view text);

struct RuleOptions {
    int krum_f = -1;         // < 0: ceil(q * K)
    int mkrum_select = -1;   // < 0: n - f - 2
    MudHogOptions mudhog;
    FlGuardianOptions flguardian;
};

/// Stateful aggregation front-end for one training run.
class Aggregator {
public:
    Aggregator(Rule rule, RuleOptions opts, double malicious_fraction);

    /// Normalizes weights, sorts by client id and applies the rule.
    std::vector<double> aggregate(std::vector<ClientUpdate> updates);

    Rule rule() const noexcept { return rule_; }
    const AggregatorState& state() const noexcept { return state_; }
    int krum_f(std::size_t n) const;

private:
    Rule rule_;
    RuleOptions opts_;
    double q_;
    AggregatorState state_;
};

}  // namespace qfl::agg
