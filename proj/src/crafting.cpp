#include "qfl/crafting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/SVD>

#include "qfl/errors.hpp"

namespace qfl::crafting {

namespace {

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

HistoryBuffer::HistoryBuffer(std::size_t capacity, std::size_t dim) : capacity_(capacity), dim_(dim) {
    if (capacity == 0) throw ConfigError("history window must be positive");
}

void HistoryBuffer::push(std::span<const double> h) {
    if (dim_ == 0) dim_ = h.size();
    if (h.size() != dim_)
        throw ShapeError("history entry has dimension " + std::to_string(h.size()) + ", buffer holds " +
                         std::to_string(dim_));
    if (entries_.size() == capacity_) entries_.pop_front();
    entries_.emplace_back(h.begin(), h.end());

    double sum = 0.0;
    for (const auto& e : entries_) sum += norm2(e);
    mu_ = sum / static_cast<double>(entries_.size());
    double var = 0.0;
    for (const auto& e : entries_) {
        const double d = norm2(e) - mu_;
        var += d * d;
    }
    sigma_ = std::max(kSigmaFloor, std::sqrt(var / static_cast<double>(entries_.size())));
}

HistoryBuffer push_history(HistoryBuffer buf, std::span<const double> h) {
    buf.push(h);
    return buf;
}

std::string_view to_string(TargetNormRule rule) {
    return rule == TargetNormRule::Fixed ? "fixed" : "sample_gaussian";
}

TargetNormRule parse_target_norm_rule(std::string_view t) {
    if (t == "sample_gaussian") return TargetNormRule::SampleGaussian;
    if (t == "fixed") return TargetNormRule::Fixed;
    throw ConfigError("unknown target norm rule '" + std::string(t) + "' (sample_gaussian, fixed)");
}

void CraftingConfig::validate() const {
    if (window == 0) throw ConfigError("crafting.window must be positive");
    if (!(eps_min >= 0.0 && eps_min <= eps_max)) throw ConfigError("need 0 <= eps_min <= eps_max");
    if (!(noise_sigma >= 0.0)) throw ConfigError("crafting.noise_sigma must be non-negative");
    if (!(sparsity_quantile >= 0.0 && sparsity_quantile < 1.0))
        throw ConfigError("crafting.sparsity must lie in [0, 1)");
    if (target_norm_rule == TargetNormRule::Fixed && !(fixed_target_norm > 0.0))
        throw ConfigError("fixed target norm must be positive");
}

Reference nearest_reference(const HistoryBuffer& buf, std::span<const double> r) {
    if (buf.empty()) throw ProtocolError("history buffer is empty");
    if (r.size() != buf.dim())
        throw ShapeError("update has dimension " + std::to_string(r.size()) + ", history holds " +
                         std::to_string(buf.dim()));
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < buf.size(); ++i) {
        const auto& h = buf.entries()[i];
        double d = 0.0;
        for (std::size_t k = 0; k < r.size(); ++k) d += (r[k] - h[k]) * (r[k] - h[k]);
        if (d < best_d) {  // strict: earliest entry wins ties
            best_d = d;
            best = i;
        }
    }
    Reference ref;
    ref.index = best;
    ref.anchor = buf.entries()[best];
    ref.residual.resize(r.size());
    for (std::size_t k = 0; k < r.size(); ++k) ref.residual[k] = r[k] - ref.anchor[k];
    return ref;
}

std::vector<std::vector<double>> principal_directions(const HistoryBuffer& buf, std::size_t top_k) {
    std::vector<std::vector<double>> dirs;
    if (top_k == 0 || buf.size() < 2) return dirs;
    const auto rows = static_cast<Eigen::Index>(buf.size());
    const auto cols = static_cast<Eigen::Index>(buf.dim());
    Eigen::MatrixXd h(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) h(i, j) = buf.entries()[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    const Eigen::RowVectorXd mean = h.colwise().mean();
    h.rowwise() -= mean;

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(h, Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    const double tol = std::max(1e-12, s.size() > 0 ? s(0) * 1e-10 : 0.0);
    const auto k = std::min<Eigen::Index>(static_cast<Eigen::Index>(top_k), s.size());
    for (Eigen::Index i = 0; i < k; ++i) {
        if (s(i) <= tol) break;
        const auto v = svd.matrixV().col(i);
        dirs.emplace_back(v.data(), v.data() + v.size());
    }
    return dirs;
}

std::vector<double> null_space_component(std::span<const double> u, const HistoryBuffer& buf, std::size_t top_k) {
    std::vector<double> out(u.begin(), u.end());
    if (top_k == 0) return out;
    if (buf.size() < 2) throw ProtocolError("principal-component removal needs at least two history entries");
    if (u.size() != buf.dim()) throw ShapeError("update and history dimensions differ");
    for (const auto& v : principal_directions(buf, top_k)) {
        const double c = dot(out, v);  // modified Gram-Schmidt
        for (std::size_t k = 0; k < out.size(); ++k) out[k] -= c * v[k];
    }
    return out;
}

Intensity adaptive_intensity(const HistoryBuffer& buf, std::span<const double> r, const CraftingConfig& cfg) {
    const double sigma = std::max(kSigmaFloor, buf.std_norm());
    Intensity it;
    it.score = std::abs(norm2(r) - buf.mean_norm()) / sigma;
    it.epsilon = std::max(cfg.eps_min, cfg.eps_max / (1.0 + it.score));
    if (!std::isfinite(it.score)) it.epsilon = cfg.eps_min;
    return it;
}

Camouflaged camouflage(std::span<const double> p, const HistoryBuffer& buf, const CraftingConfig& cfg, Rng& rng) {
    const double pn = norm2(p);
    if (!(pn > 0.0)) throw ProtocolError("cannot rescale a zero update");
    Camouflaged out;
    const double mu = buf.mean_norm();
    if (cfg.target_norm_rule == TargetNormRule::Fixed) {
        out.target_norm = cfg.fixed_target_norm;
    } else {
        std::normal_distribution<double> normal(mu, buf.std_norm());
        out.target_norm = std::max(normal(rng), 0.1 * mu);
    }
    const double scale = out.target_norm / pn;
    out.rescaled.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out.rescaled[i] = p[i] * scale;
    out.noisy = out.rescaled;
    const double sd = cfg.noise_relative ? cfg.noise_sigma * mu : cfg.noise_sigma;
    if (sd > 0.0) {
        std::normal_distribution<double> noise(0.0, sd);
        for (auto& v : out.noisy) v += noise(rng);
    }
    return out;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw ProtocolError("quantile of an empty set");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<double> sparsify(std::span<const double> p, double kappa_s) {
    if (!(kappa_s >= 0.0 && kappa_s < 1.0)) throw ConfigError("sparsity quantile must lie in [0, 1)");
    std::vector<double> out(p.begin(), p.end());
    if (kappa_s == 0.0 || out.empty()) return out;
    std::vector<double> mags(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) mags[i] = std::abs(p[i]);
    const double tau = quantile(mags, kappa_s);
    for (std::size_t i = 0; i < out.size(); ++i)
        if (mags[i] < tau) out[i] = 0.0;
    return out;
}

CraftResult craft(std::span<const double> raw, const HistoryBuffer& buf, const CraftingConfig& cfg, Rng& rng,
                  std::optional<double> eps_override) {
    cfg.validate();
    CraftResult res;
    auto& tr = res.trace;
    tr.raw_norm = norm2(raw);
    if (buf.empty()) {
        tr.bypassed = true;
        res.delta.assign(raw.begin(), raw.end());
        tr.output_norm = tr.raw_norm;
        return res;
    }
    const auto ref = nearest_reference(buf, raw);
    tr.anchor_index = ref.index;
    tr.residual_norm = norm2(ref.residual);

    const std::size_t k = buf.size() >= 2 ? cfg.top_k : 0;
    const auto dirs = principal_directions(buf, k);
    std::vector<double> u_perp = ref.residual;
    for (const auto& v : dirs) {
        const double c = dot(u_perp, v);
        for (std::size_t i = 0; i < u_perp.size(); ++i) u_perp[i] -= c * v[i];
    }
    for (const auto& v : dirs) tr.max_projection = std::max(tr.max_projection, std::abs(dot(u_perp, v)));
    tr.projected_norm = norm2(u_perp);

    const auto it = adaptive_intensity(buf, raw, cfg);
    tr.score = it.score;
    tr.epsilon = eps_override.value_or(it.epsilon);

    std::vector<double> p(raw.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = ref.anchor[i] + tr.epsilon * u_perp[i];
    if (!(norm2(p) > 0.0)) {
        tr.substituted_anchor = true;
        p = ref.anchor;
    }
    if (!(norm2(p) > 0.0)) {
        res.delta.assign(raw.size(), 0.0);
        return res;
    }
    const auto cam = camouflage(p, buf, cfg, rng);
    tr.target_norm = cam.target_norm;
    tr.prenoise_norm = norm2(cam.rescaled);
    res.delta = sparsify(cam.noisy, cfg.sparsity_quantile);
    tr.output_norm = norm2(res.delta);
    const auto zeros = std::count(res.delta.begin(), res.delta.end(), 0.0);
    tr.zero_fraction = static_cast<double>(zeros) / static_cast<double>(res.delta.size());
    return res;
}

}  // namespace qfl::crafting
