#include "qfl/aggregators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "qfl/errors.hpp"

namespace qfl::agg {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

double cosine(std::span<const double> a, std::span<const double> b) {
    const double na = norm2(a);
    const double nb = norm2(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

void require_nonempty(std::span<const ClientUpdate> updates) {
    if (updates.empty()) throw ProtocolError("no client updates to aggregate");
    const auto d = updates.front().delta.size();
    for (const auto& u : updates)
        if (u.delta.size() != d) throw ProtocolError("client updates have different dimensions");
}

std::vector<double> mean_of(std::span<const ClientUpdate> updates, std::span<const std::size_t> idx,
                            bool weighted) {
    const auto d = updates.front().delta.size();
    std::vector<double> out(d, 0.0);
    double total = 0.0;
    for (auto i : idx) total += weighted ? updates[i].weight : 1.0;
    for (auto i : idx) {
        const double w = (weighted ? updates[i].weight : 1.0) / total;
        for (std::size_t k = 0; k < d; ++k) out[k] += w * updates[i].delta[k];
    }
    return out;
}

// Indices ordered by (score, client id).
std::vector<std::size_t> rank_by_score(std::span<const ClientUpdate> updates, const std::vector<double>& scores) {
    std::vector<std::size_t> order(updates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] < scores[b];
        return updates[a].client_id < updates[b].client_id;
    });
    return order;
}

const std::vector<double>& history_of(const AggregatorState& state, const ClientUpdate& u) {
    static const std::vector<double> empty;
    const auto it = state.history.find(u.client_id);
    return it == state.history.end() ? empty : it->second;
}

}  // namespace

void normalize_weights(std::vector<ClientUpdate>& updates) {
    require_nonempty(updates);
    double total = 0.0;
    for (const auto& u : updates) {
        if (!(u.weight > 0.0) || !std::isfinite(u.weight)) throw ProtocolError("client weights must be positive");
        total += u.weight;
    }
    for (auto& u : updates) u.weight /= total;
}

std::vector<double> fedavg(std::span<const ClientUpdate> updates) {
    require_nonempty(updates);
    std::vector<double> out(updates.front().delta.size(), 0.0);
    for (const auto& u : updates)
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += u.weight * u.delta[k];
    return out;
}

std::vector<double> krum_scores(std::span<const ClientUpdate> updates, int f) {
    require_nonempty(updates);
    const auto n = static_cast<int>(updates.size());
    if (f < 0 || n < f + 3)
        throw ConfigError("Krum needs n >= f + 3 (n = " + std::to_string(n) + ", f = " + std::to_string(f) + ")");
    const auto neighbours = static_cast<std::size_t>(n - f - 2);
    std::vector<double> scores(updates.size());
    std::vector<double> d;
    for (std::size_t i = 0; i < updates.size(); ++i) {
        d.clear();
        for (std::size_t j = 0; j < updates.size(); ++j)
            if (j != i) d.push_back(sq_dist(updates[i].delta, updates[j].delta));
        std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(neighbours), d.end());
        scores[i] = std::accumulate(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(neighbours), 0.0);
    }
    return scores;
}

std::vector<double> krum(std::span<const ClientUpdate> updates, int f) {
    const auto scores = krum_scores(updates, f);
    return updates[rank_by_score(updates, scores).front()].delta;
}

std::vector<int> multi_krum_selection(std::span<const ClientUpdate> updates, int f, int m_select) {
    const auto scores = krum_scores(updates, f);
    const int n = static_cast<int>(updates.size());
    if (m_select < 1 || m_select > n - f - 2)
        throw ConfigError("Multi-Krum selection size must lie in [1, n - f - 2]");
    const auto order = rank_by_score(updates, scores);
    std::vector<int> ids;
    for (int i = 0; i < m_select; ++i) ids.push_back(updates[order[static_cast<std::size_t>(i)]].client_id);
    return ids;
}

std::vector<double> multi_krum(std::span<const ClientUpdate> updates, int f, int m_select) {
    const auto scores = krum_scores(updates, f);
    const int n = static_cast<int>(updates.size());
    if (m_select < 1 || m_select > n - f - 2)
        throw ConfigError("Multi-Krum selection size must lie in [1, n - f - 2]");
    auto order = rank_by_score(updates, scores);
    order.resize(static_cast<std::size_t>(m_select));
    return mean_of(updates, order, false);
}

void AggregatorState::accumulate(std::span<const ClientUpdate> updates) {
    for (const auto& u : updates) {
        auto& h = history[u.client_id];
        if (h.empty()) h.assign(u.delta.size(), 0.0);
        if (h.size() != u.delta.size()) throw ShapeError("history dimension changed between rounds");
        for (std::size_t k = 0; k < h.size(); ++k) h[k] += u.delta[k];
    }
    ++rounds_seen;
}

std::vector<double> foolsgold_weights(std::span<const ClientUpdate> updates, const AggregatorState& state) {
    const std::size_t n = updates.size();
    std::vector<std::vector<double>> cs(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) cs[i][j] = cosine(history_of(state, updates[i]), history_of(state, updates[j]));

    std::vector<double> maxcs(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) maxcs[i] = std::max(maxcs[i], cs[i][j]);
    if (n == 1) maxcs[0] = 0.0;

    // Pardoning: honest clients that happen to resemble a sybil get their
    // similarity scaled down by the ratio of maximum similarities.
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            if (maxcs[i] < maxcs[j] && maxcs[j] > 0.0) cs[i][j] = cs[i][j] * maxcs[i] / maxcs[j];
        }

    std::vector<double> wv(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        double mx = n > 1 ? -std::numeric_limits<double>::infinity() : 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) mx = std::max(mx, cs[i][j]);
        wv[i] = std::clamp(1.0 - mx, 0.0, 1.0);
    }
    const double wmax = *std::max_element(wv.begin(), wv.end());
    if (wmax <= 0.0) return std::vector<double>(n, 0.0);
    for (auto& w : wv) {
        w /= wmax;
        if (w == 1.0) w = 0.99;
        w = (w <= 0.0) ? 0.0 : std::log(w / (1.0 - w)) + 0.5;
        if (!std::isfinite(w) || w > 1.0) w = w > 0.0 ? 1.0 : 0.0;
        if (w < 0.0) w = 0.0;
    }
    return wv;
}

std::vector<double> foolsgold(std::span<const ClientUpdate> updates, AggregatorState& state) {
    require_nonempty(updates);
    state.accumulate(updates);
    if (updates.size() == 1) return updates.front().delta;
    for (const auto& u : updates)
        if (norm2(history_of(state, u)) == 0.0) return fedavg(updates);
    const auto wv = foolsgold_weights(updates, state);
    const double total = std::accumulate(wv.begin(), wv.end(), 0.0);
    if (!(total > 0.0)) return fedavg(updates);
    std::vector<double> out(updates.front().delta.size(), 0.0);
    for (std::size_t i = 0; i < updates.size(); ++i)
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += (wv[i] / total) * updates[i].delta[k];
    return out;
}

std::vector<int> mudhog_clusters(std::span<const ClientUpdate> updates, const AggregatorState& state,
                                 const MudHogOptions& opts) {
    const std::size_t n = updates.size();
    if (n < 2) return {};
    std::vector<std::vector<double>> sig(n);
    for (std::size_t i = 0; i < n; ++i) {
        sig[i] = history_of(state, updates[i]);
        const double nn = norm2(sig[i]);
        if (nn == 0.0) return {};
        for (auto& v : sig[i]) v /= nn;
    }
    auto cos_dist = [](std::span<const double> a, std::span<const double> b) { return 1.0 - cosine(a, b); };

    // Seeds: the most distant pair (ties to the lowest index pair).
    std::size_t sa = 0;
    std::size_t sb = 0;
    double far = -1.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = cos_dist(sig[i], sig[j]);
            if (d > far + 1e-15) {
                far = d;
                sa = i;
                sb = j;
            }
        }
    if (far < 1e-12) return {};

    std::vector<double> ca = sig[sa];
    std::vector<double> cb = sig[sb];
    std::vector<int> label(n, -1);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            const int l = cos_dist(sig[i], ca) <= cos_dist(sig[i], cb) ? 0 : 1;
            if (l != label[i]) {
                label[i] = l;
                changed = true;
            }
        }
        if (!changed) break;
        std::fill(ca.begin(), ca.end(), 0.0);
        std::fill(cb.begin(), cb.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            auto& c = label[i] == 0 ? ca : cb;
            for (std::size_t k = 0; k < c.size(); ++k) c[k] += sig[i][k];
        }
    }
    if (cos_dist(ca, cb) < opts.min_separation) return {};
    return label;
}

std::vector<double> mudhog(std::span<const ClientUpdate> updates, AggregatorState& state, const MudHogOptions& opts) {
    require_nonempty(updates);
    state.accumulate(updates);
    const auto label = mudhog_clusters(updates, state, opts);
    if (label.empty()) return fedavg(updates);
    const auto size0 = static_cast<std::size_t>(std::count(label.begin(), label.end(), 0));
    const auto size1 = label.size() - size0;
    if (size0 == size1) return fedavg(updates);
    const int keep = size0 > size1 ? 0 : 1;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < label.size(); ++i)
        if (label[i] == keep) idx.push_back(i);
    return mean_of(updates, idx, true);
}

std::vector<double> coordinate_median(std::span<const ClientUpdate> updates) {
    require_nonempty(updates);
    const auto d = updates.front().delta.size();
    std::vector<double> out(d);
    std::vector<double> col(updates.size());
    for (std::size_t k = 0; k < d; ++k) {
        for (std::size_t i = 0; i < updates.size(); ++i) col[i] = updates[i].delta[k];
        std::sort(col.begin(), col.end());
        const auto m = col.size() / 2;
        out[k] = col.size() % 2 ? col[m] : 0.5 * (col[m - 1] + col[m]);
    }
    return out;
}

std::vector<int> flguardian_survivors(std::span<const ClientUpdate> updates, const FlGuardianOptions& opts) {
    require_nonempty(updates);
    if (updates.size() < 3) throw ConfigError("FLGuardian screening needs at least three updates");
    const auto center = coordinate_median(updates);
    std::vector<double> norms(updates.size());
    for (std::size_t i = 0; i < updates.size(); ++i) norms[i] = norm2(updates[i].delta);
    const double mean = std::accumulate(norms.begin(), norms.end(), 0.0) / static_cast<double>(norms.size());
    double var = 0.0;
    for (double v : norms) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(norms.size()));
    const bool center_zero = norm2(center) == 0.0;

    std::vector<int> ids;
    for (std::size_t i = 0; i < updates.size(); ++i) {
        const double z = sd > 0.0 ? (norms[i] - mean) / sd : 0.0;
        if (z > opts.z_threshold) continue;
        if (!center_zero && norms[i] > 0.0 && cosine(updates[i].delta, center) < opts.min_cosine) continue;
        ids.push_back(updates[i].client_id);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::vector<double> flguardian_screen(std::span<const ClientUpdate> updates, const FlGuardianOptions& opts) {
    const auto ids = flguardian_survivors(updates, opts);
    if (ids.empty()) return coordinate_median(updates);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < updates.size(); ++i)
        if (std::binary_search(ids.begin(), ids.end(), updates[i].client_id)) idx.push_back(i);
    return mean_of(updates, idx, true);
}

void server_apply(std::vector<double>& theta, std::span<const double> aggregate, double beta) {
    if (theta.size() != aggregate.size())
        throw ShapeError("aggregate has dimension " + std::to_string(aggregate.size()) + ", model has " +
                         std::to_string(theta.size()));
    for (double v : aggregate)
        if (!std::isfinite(v)) throw NumericFault("non-finite aggregate; round rejected");
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += beta * aggregate[i];
}

std::string_view to_string(Rule rule) {
    switch (rule) {
        case Rule::FedAvg: return "fedavg";
        case Rule::Krum: return "krum";
        case Rule::MultiKrum: return "mkrum";
        case Rule::FoolsGold: return "foolsgold";
        case Rule::MudHog: return "mudhog";
        case Rule::FlGuardian: return "flguardian";
    }
    return "?";
}

std::string_view record_name(Rule rule) {
    switch (rule) {
        case Rule::MudHog: return "mudhog-proxy";
        case Rule::FlGuardian: return "flguardian-proxy";
        default: return to_string(rule);
    }
}

Rule parse_rule(std::string_view t) {
    if (t == "fedavg") return Rule::FedAvg;
    if (t == "krum") return Rule::Krum;
    if (t == "mkrum" || t == "multikrum") return Rule::MultiKrum;
    if (t == "foolsgold") return Rule::FoolsGold;
    if (t == "mudhog" || t == "mudhog-proxy") return Rule::MudHog;
    if (t == "flguardian" || t == "flguardian-proxy") return Rule::FlGuardian;
    throw ConfigError("unknown defense '" + std::string(t) +
                      "' (fedavg, krum, mkrum, foolsgold, mudhog, flguardian)");
}

Aggregator::Aggregator(Rule rule, RuleOptions opts, double malicious_fraction)
    : rule_(rule), opts_(opts), q_(malicious_fraction) {}

int Aggregator::krum_f(std::size_t n) const {
    if (opts_.krum_f >= 0) return opts_.krum_f;
    return static_cast<int>(std::ceil(q_ * static_cast<double>(n) - 1e-9));
}

std::vector<double> Aggregator::aggregate(std::vector<ClientUpdate> updates) {
    normalize_weights(updates);
    std::sort(updates.begin(), updates.end(),
              [](const ClientUpdate& a, const ClientUpdate& b) { return a.client_id < b.client_id; });
    switch (rule_) {
        case Rule::FedAvg:
            return fedavg(updates);
        case Rule::Krum:
            return krum(updates, krum_f(updates.size()));
        case Rule::MultiKrum: {
            const int f = krum_f(updates.size());
            const int m = opts_.mkrum_select > 0 ? opts_.mkrum_select : static_cast<int>(updates.size()) - f - 2;
            return multi_krum(updates, f, m);
        }
        case Rule::FoolsGold:
            return foolsgold(updates, state_);
        case Rule::MudHog:
            return mudhog(updates, state_, opts_.mudhog);
        case Rule::FlGuardian:
            return flguardian_screen(updates, opts_.flguardian);
    }
    return fedavg(updates);
}

}  // namespace qfl::agg
