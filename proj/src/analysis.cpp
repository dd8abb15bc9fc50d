#include "qfl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "qfl/errors.hpp"

namespace qfl::analysis {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

}  // namespace

StealthCheck stealth_membership(std::span<const double> u, const StealthSetParams& params) {
    if (!params.center.empty() && params.center.size() != u.size())
        throw ShapeError("stealth center and update dimensions differ");
    StealthCheck out;
    out.norm = norm2(u);
    const double cn = params.center.empty() ? 0.0 : norm2(params.center);
    if (cn == 0.0 || out.norm == 0.0) {
        out.cosine_vacuous = true;
        out.cosine = 1.0;
    } else {
        out.cosine = dot(u, params.center) / (out.norm * cn);
    }
    out.member = out.norm <= params.radius && (out.cosine_vacuous || out.cosine >= params.kappa);
    return out;
}

void clip_to_radius(std::vector<double>& v, double r) {
    const double n = norm2(v);
    if (n > r && n > 0.0) {
        const double s = r / n;
        for (auto& x : v) x *= s;
    }
}

Lemma1Result lemma1_check(std::span<const agg::ClientUpdate> malicious, double r, double q) {
    Lemma1Result out;
    out.bound = q * r;
    if (malicious.empty()) return out;
    std::vector<double> b(malicious.front().delta.size(), 0.0);
    for (const auto& u : malicious)
        for (std::size_t k = 0; k < b.size(); ++k) b[k] += u.weight * u.delta[k];
    out.b_norm = norm2(b);
    out.pass = out.b_norm <= out.bound + 1e-9;
    return out;
}

Prop1Report proposition1_check(std::span<const double> deviations, std::span<const double> b_norms, double L,
                               double beta, double tol) {
    Prop1Report rep;
    if (deviations.size() != b_norms.size() + 1 || !std::isfinite(L)) {
        rep.skipped = true;
        return rep;
    }
    rep.max_residual = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < b_norms.size(); ++t) {
        const double rhs = (1.0 + beta * L) * deviations[t] + beta * b_norms[t];
        const double res = deviations[t + 1] - rhs;
        rep.residuals.push_back(res);
        rep.max_residual = std::max(rep.max_residual, res);
        if (res > tol) ++rep.violations;
    }
    if (b_norms.empty()) rep.max_residual = 0.0;
    return rep;
}

std::vector<double> unrolled_deviation_bound(std::span<const double> b_norms, double L, double beta) {
    std::vector<double> out;
    double acc = 0.0;
    for (double b : b_norms) {
        acc = (1.0 + beta * L) * acc + beta * b;
        out.push_back(acc);
    }
    return out;
}

double margin(std::span<const double> logits) {
    if (logits.size() < 2) throw ConfigError("margin needs at least two classes");
    const auto top = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    double runner = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < logits.size(); ++c)
        if (c != top) runner = std::max(runner, logits[c]);
    return logits[top] - runner;
}

MarginStats margin_distribution(const model::ModelParams& params, const qsim::CircuitTemplate& circuit,
                                const Batch& test) {
    MarginStats s;
    s.margins.reserve(test.size());
    for (std::size_t i = 0; i < test.size(); ++i)
        s.margins.push_back(margin(model::forward(test.input(i), params, circuit).logits));
    return s;
}

namespace {

std::vector<std::vector<double>> all_logits(const model::ModelParams& p, const qsim::CircuitTemplate& circuit,
                                            const Batch& test) {
    std::vector<std::vector<double>> out;
    out.reserve(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) out.push_back(model::forward(test.input(i), p, circuit).logits);
    return out;
}

}  // namespace

double estimate_output_lipschitz(std::span<const std::pair<std::vector<double>, std::vector<double>>> pairs,
                                 const model::ParamManifest& manifest, const qsim::CircuitTemplate& circuit,
                                 const Batch& test) {
    double best = 0.0;
    for (const auto& [a, b] : pairs) {
        const double d = distance(a, b);
        if (!(d > 0.0)) continue;
        const auto la = all_logits(model::ModelParams{manifest, a}, circuit, test);
        const auto lb = all_logits(model::ModelParams{manifest, b}, circuit, test);
        for (std::size_t i = 0; i < la.size(); ++i) {
            double inf = 0.0;
            for (std::size_t c = 0; c < la[i].size(); ++c) inf = std::max(inf, std::abs(la[i][c] - lb[i][c]));
            best = std::max(best, inf / d);
        }
    }
    return best;
}

Theorem1Stats theorem1_statistics(const model::ModelParams& clean, const model::ModelParams& attacked,
                                  const qsim::CircuitTemplate& circuit, const Batch& test,
                                  std::span<const std::pair<std::vector<double>, std::vector<double>>> pairs) {
    Theorem1Stats st;
    st.drift = distance(clean.flat, attacked.flat);
    std::vector<std::pair<std::vector<double>, std::vector<double>>> all(pairs.begin(), pairs.end());
    all.emplace_back(clean.flat, attacked.flat);
    st.lipschitz = estimate_output_lipschitz(all, clean.manifest, circuit, test);
    if (test.empty()) return st;

    const auto lc = all_logits(clean, circuit, test);
    const auto la = all_logits(attacked, circuit, test);
    const double band = 2.0 * st.lipschitz * st.drift;
    std::size_t in_band = 0;
    std::size_t flips = 0;
    for (std::size_t i = 0; i < lc.size(); ++i) {
        const double g = margin(lc[i]);
        if (st.drift == 0.0 ? g == 0.0 : g <= band) ++in_band;
        if (model::argmax(lc[i]) != model::argmax(la[i])) ++flips;
    }
    st.band_fraction = static_cast<double>(in_band) / static_cast<double>(lc.size());
    st.flip_fraction = static_cast<double>(flips) / static_cast<double>(lc.size());
    return st;
}

double estimate_smoothness(std::span<const std::pair<std::vector<double>, std::vector<double>>> pairs,
                           const model::ParamManifest& manifest, const qsim::CircuitTemplate& circuit,
                           const Batch& data) {
    double best = 0.0;
    for (const auto& [a, b] : pairs) {
        const double d = distance(a, b);
        if (!(d > 0.0)) continue;
        const auto ga = model::backward(data, model::ModelParams{manifest, a}, circuit, 1.0).gradient;
        const auto gb = model::backward(data, model::ModelParams{manifest, b}, circuit, 1.0).gradient;
        best = std::max(best, distance(ga, gb) / d);
    }
    return best;
}

double accuracy_drop(double baseline_acc, double attacked_acc) { return baseline_acc - attacked_acc; }

QuadraticObjective QuadraticObjective::random(int clients, int dim, int rows, Rng& rng) {
    if (clients < 1 || dim < 1 || rows < 1) throw ConfigError("quadratic objective sizes must be positive");
    std::normal_distribution<double> normal(0.0, 1.0);
    QuadraticObjective q;
    for (int k = 0; k < clients; ++k) {
        Eigen::MatrixXd a(rows, dim);
        Eigen::VectorXd c(rows);
        for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < dim; ++j) a(i, j) = normal(rng) / std::sqrt(static_cast<double>(rows));
            c(i) = normal(rng);
        }
        q.a.push_back(std::move(a));
        q.c.push_back(std::move(c));
        q.weights.push_back(1.0 / clients);
    }
    return q;
}

double QuadraticObjective::smoothness() const {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim(), dim());
    for (int k = 0; k < clients(); ++k) h += weights[static_cast<std::size_t>(k)] * a[static_cast<std::size_t>(k)].transpose() * a[static_cast<std::size_t>(k)];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    return es.eigenvalues().maxCoeff();
}

Eigen::VectorXd QuadraticObjective::client_gradient(int k, const Eigen::VectorXd& theta) const {
    const auto& ak = a[static_cast<std::size_t>(k)];
    return ak.transpose() * (ak * theta - c[static_cast<std::size_t>(k)]);
}

QuadraticRun run_quadratic_federation(const QuadraticObjective& objective, std::span<const int> malicious,
                                      int rounds, double client_lr, double beta, double radius, Rng& rng) {
    const int K = objective.clients();
    const int d = objective.dim();
    auto is_mal = [&](int k) { return std::find(malicious.begin(), malicious.end(), k) != malicious.end(); };

    // Attack-free twin: attackers hold no local objective, so they send zero.
    QuadraticObjective twin = objective;
    for (int k : malicious) {
        twin.a[static_cast<std::size_t>(k)].setZero();
        twin.c[static_cast<std::size_t>(k)].setZero();
    }

    QuadraticRun run;
    run.L = twin.smoothness();
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd theta_ben = theta;
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    run.deviations.push_back(0.0);
    for (int t = 0; t < rounds; ++t) {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
        Eigen::VectorXd g_ben = Eigen::VectorXd::Zero(d);
        for (int k = 0; k < K; ++k) {
            const double w = twin.weights[static_cast<std::size_t>(k)];
            g_ben += w * (-client_lr * twin.client_gradient(k, theta_ben));
            if (is_mal(k)) {
                Eigen::VectorXd p(d);
                for (int i = 0; i < d; ++i) p(i) = normal(rng);
                p *= radius * unit(rng) / p.norm();
                b += w * p;
            } else {
                g += w * (-client_lr * twin.client_gradient(k, theta));
            }
        }
        theta += beta * (g + b);
        theta_ben += beta * g_ben;
        run.b_norms.push_back(b.norm());
        run.deviations.push_back((theta - theta_ben).norm());
    }
    return run;
}

}  // namespace qfl::analysis
