#pragma once

// Post-training update crafting: reshape a malicious raw delta so that it
// sits near the attacker's record of honest-looking updates.
//
//   nearest_reference -> null_space_component -> adaptive_intensity
//   -> p = h* + eps * u_perp -> camouflage -> sparsify

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "qfl/rng.hpp"

namespace qfl::crafting {

inline constexpr double kSigmaFloor = 1e-12;

/// Fixed-capacity FIFO of flattened honest-like updates with norm statistics
/// (population mean and standard deviation, refreshed on every push).
class HistoryBuffer {
public:
    explicit HistoryBuffer(std::size_t capacity, std::size_t dim = 0);

    /// Appends h, evicting the oldest entry at capacity. The first push fixes
    /// the dimension when it was not given; later mismatches throw ShapeError.
    void push(std::span<const double> h);

    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    std::size_t dim() const noexcept { return dim_; }
    const std::deque<std::vector<double>>& entries() const noexcept { return entries_; }

    double mean_norm() const noexcept { return mu_; }
    /// Never below kSigmaFloor.
    double std_norm() const noexcept { return sigma_; }

private:
    std::size_t capacity_;
    std::size_t dim_;
    std::deque<std::vector<double>> entries_;
    double mu_ = 0.0;
    double sigma_ = kSigmaFloor;
};

HistoryBuffer push_history(HistoryBuffer buf, std::span<const double> h);

enum class TargetNormRule { SampleGaussian, Fixed };

std::string_view to_string(TargetNormRule rule);
TargetNormRule parse_target_norm_rule(std::string_view text);

struct CraftingConfig {
    bool enabled = true;
    std::size_t window = 10;
    std::size_t top_k = 3;
    double eps_min = 0.05;
    double eps_max = 1.0;
    double noise_sigma = 1e-3;
    /// Per-coordinate noise std is noise_sigma * mu when set, else noise_sigma.
    bool noise_relative = true;
    double sparsity_quantile = 0.5;  // kappa_s
    TargetNormRule target_norm_rule = TargetNormRule::SampleGaussian;
    double fixed_target_norm = 1.0;  // used by TargetNormRule::Fixed

    void validate() const;
};

struct Reference {
    std::vector<double> anchor;    // h*
    std::vector<double> residual;  // u = r - h*
    std::size_t index = 0;         // position of h* in the buffer
};

/// Nearest entry in L2, ties to the earliest inserted. Throws ProtocolError on
/// an empty buffer (callers fall back to sending the raw update).
Reference nearest_reference(const HistoryBuffer& buf, std::span<const double> r);

/// Top-k right singular vectors of the row-centered history (rows of the
/// returned list are unit vectors). Fewer than k come back when the centered
/// history has lower rank.
std::vector<std::vector<double>> principal_directions(const HistoryBuffer& buf, std::size_t top_k);

/// u minus its projection on the top_k principal directions of the centered
/// history. top_k = 0 returns u.
std::vector<double> null_space_component(std::span<const double> u, const HistoryBuffer& buf, std::size_t top_k);

struct Intensity {
    double score = 0.0;    // s_t = | ||r|| - mu | / sigma
    double epsilon = 0.0;  // max(eps_min, eps_max / (1 + s_t))
};

Intensity adaptive_intensity(const HistoryBuffer& buf, std::span<const double> r, const CraftingConfig& cfg);

struct Camouflaged {
    std::vector<double> rescaled;  // p_hat, norm == target_norm
    std::vector<double> noisy;     // p_hat + xi
    double target_norm = 0.0;      // R_t
};

/// Draws R_t = max(N(mu, sigma), 0.1 mu) (or the fixed norm), rescales p to
/// it and adds isotropic Gaussian noise. Throws ProtocolError for ||p|| = 0.
Camouflaged camouflage(std::span<const double> p, const HistoryBuffer& buf, const CraftingConfig& cfg, Rng& rng);

/// Linear-interpolation empirical quantile (the default rule of numpy.quantile)
/// of `values`, q in [0, 1].
double quantile(std::vector<double> values, double q);

/// Zeroes every coordinate with |v| below the kappa_s quantile of |v|.
std::vector<double> sparsify(std::span<const double> p, double kappa_s);

/// Per-step intermediates for the debug round log.
struct CraftTrace {
    bool bypassed = false;          // empty history: raw update sent
    bool substituted_anchor = false;  // ||p|| == 0: anchor sent instead
    std::size_t anchor_index = 0;
    double raw_norm = 0.0;
    double residual_norm = 0.0;
    double projected_norm = 0.0;
    double score = 0.0;
    double epsilon = 0.0;
    double target_norm = 0.0;
    double prenoise_norm = 0.0;
    double output_norm = 0.0;
    double zero_fraction = 0.0;
    double max_projection = 0.0;  // max_i |<u_perp, v_i>| over removed directions
};

struct CraftResult {
    std::vector<double> delta;
    CraftTrace trace;
};

/// Full pipeline. `eps_override` pins epsilon (test hook for the degenerate
/// pipeline); otherwise epsilon comes from adaptive_intensity.
CraftResult craft(std::span<const double> raw, const HistoryBuffer& buf, const CraftingConfig& cfg, Rng& rng,
                  std::optional<double> eps_override = std::nullopt);

}  // namespace qfl::crafting
