#include "checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "qfl/aggregators.hpp"
#include "qfl/analysis.hpp"
#include "qfl/crafting.hpp"
#include "qfl/federation.hpp"
#include "qfl/hybrid_model.hpp"
#include "qfl/qsim.hpp"

namespace qfl::tools {

namespace {

std::string fmt(const char* f, double a, double b = 0.0) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

qsim::Statevector random_state(int n, Rng& rng) {
    std::normal_distribution<double> nd;
    std::vector<qsim::Complex> a(std::size_t{1} << n);
    for (auto& x : a) x = {nd(rng), nd(rng)};
    return qsim::Statevector::from_amplitudes(n, std::move(a));
}

qsim::Gate random_gate(int n, Rng& rng) {
    std::uniform_int_distribution<int> kind(0, 5), wire(0, n - 1);
    std::uniform_real_distribution<double> angle(-M_PI, M_PI);
    const int w = wire(rng);
    switch (kind(rng)) {
        case 0: return qsim::Gate::rx(w, angle(rng));
        case 1: return qsim::Gate::ry(w, angle(rng));
        case 2: return qsim::Gate::rz(w, angle(rng));
        case 3: return qsim::Gate::h(w);
        case 4: return qsim::Gate::phase(w, angle(rng));
        default: {
            int t = wire(rng);
            if (t == w) t = (w + 1) % n;
            return qsim::Gate::cnot(w, t);
        }
    }
}

CheckResult check_norm(Rng& rng, int trials) {
    double worst = 0.0;
    for (int i = 0; i < trials; ++i) {
        auto s = random_state(4, rng);
        for (int g = 0; g < 20; ++g) qsim::apply_gate(s, random_gate(4, rng));
        qsim::apply_gate(s, qsim::Gate::qft({0, 1, 2, 3}));
        worst = std::max(worst, std::abs(s.norm_squared() - 1.0));
    }
    return {"norm preserved by random circuits", worst <= 1e-10, fmt("max |<psi|psi> - 1| = %.3g", worst)};
}

CheckResult check_xflip(Rng& rng, int trials) {
    double worst = 0.0;
    for (int i = 0; i < trials; ++i) {
        auto s = random_state(3, rng);
        const double before = qsim::expectation(s, qsim::Observable::z(1));
        qsim::apply_gate(s, qsim::Gate::x(1));
        worst = std::max(worst, std::abs(qsim::expectation(s, qsim::Observable::z(1)) + before));
    }
    return {"X conjugation negates <Z>", worst <= 1e-10, fmt("max error %.3g", worst)};
}

CheckResult check_qft(Rng& rng, int trials) {
    double worst = 0.0;
    for (int i = 0; i < trials; ++i) {
        auto s = random_state(4, rng);
        auto t = s;
        qsim::apply_gate(t, qsim::Gate::qft({0, 1, 2, 3}));
        qsim::apply_gate(t, qsim::Gate::inverse_qft({0, 1, 2, 3}));
        for (std::size_t k = 0; k < s.dim(); ++k) worst = std::max(worst, std::abs(s[k] - t[k]));
    }
    return {"QFT round trip", worst <= 1e-10, fmt("max amplitude error %.3g", worst)};
}

CheckResult check_gradient(Rng& rng) {
    model::ModelArchitecture arch{3, 1, 2, 3, 5};
    auto p = model::init_params(arch, rng);
    const auto circuit = model::clean_template(arch);
    Batch b;
    b.input_dim = 5;
    b.n_classes = 3;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 5; ++j) b.inputs.push_back(u(rng));
        b.labels.push_back(i % 3);
    }
    const auto g = model::backward(b, p, circuit, 1.0).gradient;
    double worst = 0.0;
    const double h = 1e-5;
    auto mean_loss = [&](const model::ModelParams& q) {
        double s = 0.0;
        for (std::size_t i = 0; i < b.size(); ++i) s += model::loss(model::forward(b.input(i), q, circuit).logits, b.labels[i]);
        return s / static_cast<double>(b.size());
    };
    for (std::size_t k = 0; k < p.flat.size(); ++k) {
        auto hi = p, lo = p;
        hi.flat[k] += h;
        lo.flat[k] -= h;
        worst = std::max(worst, std::abs((mean_loss(hi) - mean_loss(lo)) / (2 * h) - g[k]));
    }
    return {"gradient matches central differences", worst <= 1e-4, fmt("max abs error %.3g", worst)};
}

CheckResult check_lemma1(Rng& rng, int trials) {
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> u(0.1, 3.0);
    int fails = 0;
    for (int i = 0; i < trials; ++i) {
        const int K = 5, m = 2;
        const double r = u(rng);
        std::vector<agg::ClientUpdate> mal;
        for (int a = 0; a < m; ++a) {
            std::vector<double> d(8);
            for (auto& x : d) x = nd(rng) * u(rng);
            analysis::clip_to_radius(d, r);
            mal.push_back({a, 0, d, 1.0 / K});
        }
        fails += analysis::lemma1_check(mal, r, static_cast<double>(m) / K).pass ? 0 : 1;
    }
    return {"clipped perturbation within q r", fails == 0, fmt("%.0f violations", fails)};
}

CheckResult check_prop1(Rng& rng) {
    auto obj = analysis::QuadraticObjective::random(4, 6, 8, rng);
    const std::vector<int> mal{3};
    const auto run = analysis::run_quadratic_federation(obj, mal, 50, 1.0, 1.0, 0.5, rng);
    const auto rep = analysis::proposition1_check(run.deviations, run.b_norms, run.L, 1.0);
    return {"deviation recursion on a quadratic objective", rep.violations == 0,
            fmt("max residual %.3g, L = %.3g", rep.max_residual, run.L)};
}

CheckResult check_crafting(Rng& rng, int trials) {
    std::normal_distribution<double> nd;
    double worst_orth = 0.0, worst_norm = 0.0;
    for (int i = 0; i < trials; ++i) {
        crafting::HistoryBuffer buf(6);
        for (int h = 0; h < 6; ++h) {
            std::vector<double> v(20);
            for (auto& x : v) x = nd(rng);
            buf.push(v);
        }
        std::vector<double> r(20);
        for (auto& x : r) x = nd(rng);
        crafting::CraftingConfig cfg;
        cfg.noise_sigma = 0.0;
        cfg.sparsity_quantile = 0.0;
        const auto res = crafting::craft(r, buf, cfg, rng);
        worst_orth = std::max(worst_orth, res.trace.max_projection);
        worst_norm = std::max(worst_norm, std::abs(res.trace.prenoise_norm - res.trace.target_norm));
    }
    return {"crafting orthogonality and target norm", worst_orth <= 1e-8 && worst_norm <= 1e-9,
            fmt("max projection %.3g, max norm error %.3g", worst_orth, worst_norm)};
}

CheckResult check_partition(Rng& rng) {
    std::vector<int> labels(300);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 10);
    const auto parts = fed::dirichlet_partition(labels, 7, 0.3, rng);
    std::vector<int> seen(labels.size(), 0);
    bool nonempty = true;
    for (const auto& p : parts) {
        nonempty = nonempty && !p.empty();
        for (auto i : p) ++seen[i];
    }
    const bool exact = std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; });
    return {"dirichlet partition is a partition", exact && nonempty, exact ? "ok" : "index assigned twice or never"};
}

}  // namespace

std::vector<CheckResult> run_checks(std::uint64_t seed, int trials) {
    Rng rng(derive_seed(seed, {stream::kProbe, 77}));
    return {check_norm(rng, trials),   check_xflip(rng, trials),  check_qft(rng, trials),
            check_gradient(rng),       check_lemma1(rng, trials), check_prop1(rng),
            check_crafting(rng, trials), check_partition(rng)};
}

}  // namespace qfl::tools
