// Acceptance run: one PASS/FAIL line per criterion. Exit status is non-zero
// when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "../unit/oracles.hpp"
#include "qfl/aggregators.hpp"
#include "qfl/analysis.hpp"
#include "qfl/attacks.hpp"
#include "qfl/config.hpp"
#include "qfl/crafting.hpp"
#include "qfl/experiment.hpp"
#include "qfl/hybrid_model.hpp"
#include "qfl/qsim.hpp"

using namespace qfl;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

qsim::Statevector random_state(int n, Rng& rng) {
    std::normal_distribution<double> nd;
    std::vector<qsim::Complex> a(std::size_t{1} << n);
    for (auto& x : a) x = {nd(rng), nd(rng)};
    return qsim::Statevector::from_amplitudes(n, std::move(a));
}

qsim::Gate random_gate(int n, Rng& rng) {
    std::uniform_int_distribution<int> kind(0, 7), wire(0, n - 1);
    std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
    const int w = wire(rng);
    int t = wire(rng);
    if (t == w) t = (w + 1) % n;
    switch (kind(rng)) {
        case 0: return qsim::Gate::rx(w, angle(rng));
        case 1: return qsim::Gate::ry(w, angle(rng));
        case 2: return qsim::Gate::rz(w, angle(rng));
        case 3: return qsim::Gate::h(w);
        case 4: return qsim::Gate::phase(w, angle(rng));
        case 5: return qsim::Gate::cnot(w, t);
        case 6: return qsim::Gate::x(w);
        default: return qsim::Gate::qft({w, t});
    }
}

qsim::Gate random_diagonal(int n, Rng& rng) {
    std::uniform_int_distribution<int> kind(0, 3), wire(0, n - 1), b(0, 1);
    std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
    switch (kind(rng)) {
        case 0: return qsim::Gate::rz(wire(rng), angle(rng));
        case 1: return qsim::Gate::phase(wire(rng), angle(rng));
        case 2: return qsim::Gate::z(wire(rng));
        default: {
            std::vector<int> wires(n), marked(n);
            std::iota(wires.begin(), wires.end(), 0);
            for (auto& m : marked) m = b(rng);
            return qsim::Gate::phase_oracle(wires, marked);
        }
    }
}

// ---------------------------------------------------------------------------

Outcome quantum_suite() {
    const auto t0 = Clock::now();
    Rng rng(derive_seed(1, {stream::kProbe, 1}));
    const int cases = 100;
    const int n = 4;
    const std::size_t dim = std::size_t{1} << n;

    // Unitarity: assemble U column by column and check U^dagger U = I.
    double unitarity = 0.0;
    for (int c = 0; c < cases; ++c) {
        std::vector<qsim::Gate> circuit;
        for (int g = 0; g < 25; ++g) circuit.push_back(random_gate(n, rng));
        oracle::Mat u(dim, dim);
        for (std::size_t j = 0; j < dim; ++j) {
            std::vector<qsim::Complex> e(dim, 0.0);
            e[j] = 1.0;
            auto s = qsim::Statevector::from_amplitudes(n, e);
            for (const auto& g : circuit) qsim::apply_gate(s, g);
            for (std::size_t i = 0; i < dim; ++i) u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s[i];
        }
        unitarity = std::max(unitarity, (u.adjoint() * u - oracle::Mat::Identity(dim, dim)).cwiseAbs().maxCoeff());
    }

    // Diagonal gates: they commute with each other and leave computational
    // basis probabilities (hence every Z expectation) untouched.
    double commute = 0.0, inertia = 0.0;
    for (int c = 0; c < cases; ++c) {
        const auto psi = random_state(n, rng);
        const auto a = random_diagonal(n, rng), b = random_diagonal(n, rng);
        auto ab = psi, ba = psi;
        qsim::apply_gate(ab, a);
        qsim::apply_gate(ab, b);
        qsim::apply_gate(ba, b);
        qsim::apply_gate(ba, a);
        for (std::size_t i = 0; i < dim; ++i) {
            commute = std::max(commute, std::abs(ab[i] - ba[i]));
            inertia = std::max(inertia, std::abs(std::norm(ab[i]) - std::norm(psi[i])));
        }
    }

    // X_r conjugation negates <Z_r>.
    double xflip = 0.0;
    for (int c = 0; c < cases; ++c) {
        auto s = random_state(n, rng);
        const int r = c % n;
        const double before = qsim::expectation(s, qsim::Observable::z(r));
        qsim::apply_gate(s, qsim::Gate::x(r));
        xflip = std::max(xflip, std::abs(qsim::expectation(s, qsim::Observable::z(r)) + before));
    }

    // exp(-i alpha X) on |0> through the attack block gives <Z> = cos(2 alpha).
    double cos_law = 0.0;
    const model::ModelArchitecture arch{4, 1, 2, 10, 64};
    std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
    for (int c = 0; c < cases; ++c) {
        auto cfg = attacks::AttackConfig::defaults(attacks::AttackKind::Pauli, arch);
        for (auto& a : cfg.alphas) a = ang(rng);
        qsim::Statevector s(arch.n_wires());
        for (const auto& g : attacks::attack_block(cfg, arch, c)) qsim::apply_gate(s, g);
        for (std::size_t j = 0; j < cfg.wires.size(); ++j)
            cos_law = std::max(cos_law, std::abs(qsim::expectation(s, qsim::Observable::z(cfg.wires[j])) -
                                                 std::cos(2 * cfg.alphas[j])));
    }

    // QFT round trip.
    double qft = 0.0;
    for (int c = 0; c < cases; ++c) {
        const auto psi = random_state(n, rng);
        auto s = psi;
        const std::vector<int> wires{0, 1, 2, 3};
        qsim::apply_gate(s, qsim::Gate::qft(wires));
        qsim::apply_gate(s, qsim::Gate::inverse_qft(wires));
        for (std::size_t i = 0; i < dim; ++i) qft = std::max(qft, std::abs(s[i] - psi[i]));
    }

    const double secs = seconds_since(t0);
    const double tol = 1e-10;
    const bool pass = unitarity <= tol && commute <= tol && inertia <= tol && xflip <= tol && cos_law <= tol &&
                      qft <= tol && secs < 30.0;
    return {pass, fmt("100 cases each; unitarity %.1e, commutation %.1e, inertia %.1e, X flip %.1e, cos(2a) %.1e, "
                      "QFT %.1e; %.2f s",
                      unitarity, commute, inertia, xflip, cos_law, qft, secs)};
}

Outcome gradient_fidelity() {
    const auto t0 = Clock::now();
    Rng rng(derive_seed(1, {stream::kProbe, 2}));
    const model::ModelArchitecture arch{3, 1, 2, 4, 6};
    const auto circuit = model::clean_template(arch);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> label(0, arch.n_classes - 1);
    double worst = 0.0;
    std::size_t coords = 0;
    for (int trial = 0; trial < 10; ++trial) {
        const auto p = model::init_params(arch, rng);
        Batch b;
        b.input_dim = arch.input_dim;
        b.n_classes = arch.n_classes;
        for (int i = 0; i < 8; ++i) {
            for (int j = 0; j < arch.input_dim; ++j) b.inputs.push_back(u(rng));
            b.labels.push_back(label(rng));
        }
        const auto g = model::backward(b, p, circuit, 1.0).gradient;
        auto mean_loss = [&](const model::ModelParams& q) {
            double s = 0.0;
            for (std::size_t i = 0; i < b.size(); ++i)
                s += model::loss(model::forward(b.input(i), q, circuit).logits, b.labels[i]);
            return s / static_cast<double>(b.size());
        };
        const double h = 1e-5;
        for (std::size_t k = 0; k < p.flat.size(); ++k) {
            auto hi = p, lo = p;
            hi.flat[k] += h;
            lo.flat[k] -= h;
            worst = std::max(worst, std::abs((mean_loss(hi) - mean_loss(lo)) / (2 * h) - g[k]));
            ++coords;
        }
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-4 && secs < 120.0,
            fmt("10 batches, %zu coordinates, max |grad - FD| = %.2e; %.2f s", coords, worst, secs)};
}

Outcome aggregator_oracles() {
    Rng rng(derive_seed(1, {stream::kProbe, 3}));
    std::normal_distribution<double> nd;
    std::uniform_int_distribution<int> nsize(3, 10);
    int mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = nsize(rng);
        const int f = std::uniform_int_distribution<int>(0, n - 3)(rng);
        const int dim = 1 + trial % 8;
        std::vector<std::vector<double>> v(n, std::vector<double>(dim));
        std::vector<agg::ClientUpdate> u;
        for (int i = 0; i < n; ++i) {
            for (auto& x : v[i]) x = nd(rng);
            u.push_back({i, 0, v[i], 1.0 / n});
        }
        const auto ref = oracle::krum_scores(v, f);
        const auto got = agg::krum_scores(u, f);
        for (int i = 0; i < n; ++i)
            if (std::abs(got[i] - ref[i]) > 1e-12 * std::max(1.0, ref[i])) ++mismatches;
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return ref[a] < ref[b]; });
        if (agg::krum(u, f) != v[order[0]]) ++mismatches;
        const int m = n - f - 2 > 0 ? n - f - 2 : 1;
        std::vector<int> expect(order.begin(), order.begin() + m);
        std::sort(expect.begin(), expect.end());
        auto sel = agg::multi_krum_selection(u, f, m);
        std::sort(sel.begin(), sel.end());
        if (sel != expect) ++mismatches;
    }

    // Three clients: two submit identical updates every round, one differs.
    agg::Aggregator fg(agg::Rule::FoolsGold, {}, 0.0);
    double sybil_share = 1.0;
    for (int round = 0; round < 5; ++round) {
        std::vector<double> sybil(6), honest(6);
        for (auto& x : sybil) x = nd(rng);
        for (auto& x : honest) x = nd(rng);
        std::vector<agg::ClientUpdate> u{{0, round, sybil, 1.0}, {1, round, sybil, 1.0}, {2, round, honest, 1.0}};
        fg.aggregate(u);
        const auto w = agg::foolsgold_weights(u, fg.state());
        const double total = std::accumulate(w.begin(), w.end(), 0.0);
        sybil_share = total > 0.0 ? (w[0] + w[1]) / total : 1.0;
    }
    return {mismatches == 0 && sybil_share < 0.01,
            fmt("1000 Krum/Multi-Krum instances (n <= 10): %d mismatches; FoolsGold duplicate weight %.4f", mismatches,
                sybil_share)};
}

Outcome deviation_recursion() {
    Rng rng(derive_seed(1, {stream::kProbe, 5}));
    std::size_t violations = 0;
    double worst = -std::numeric_limits<double>::infinity();
    const int objectives = 20;
    for (int i = 0; i < objectives; ++i) {
        const auto obj = analysis::QuadraticObjective::random(4, 6, 8, rng);
        const std::vector<int> mal{i % 4};
        const auto run = analysis::run_quadratic_federation(obj, mal, 50, 1.0 / (obj.smoothness() + 1.0), 1.0, 0.5, rng);
        const auto rep = analysis::proposition1_check(run.deviations, run.b_norms, run.L, 1.0, 1e-8);
        violations += rep.violations;
        worst = std::max(worst, rep.max_residual);
    }
    return {violations == 0,
            fmt("K=4, 50 rounds, %d objectives: %zu violations, max (lhs - rhs) = %.2e", objectives, violations, worst)};
}

Outcome crafting_invariants() {
    Rng rng(derive_seed(1, {stream::kProbe, 6}));
    std::normal_distribution<double> nd;
    std::uniform_int_distribution<int> dims(8, 64), fill(2, 10), topk(1, 4);
    std::uniform_real_distribution<double> kappa(0.0, 0.9);
    double orth = 0.0, norm_err = 0.0;
    int eps_out = 0, sparse_bad = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int d = dims(rng);
        crafting::HistoryBuffer buf(10);
        const double scale = std::exp(nd(rng));
        for (int i = fill(rng); i > 0; --i) {
            std::vector<double> h(d);
            for (auto& x : h) x = scale * nd(rng);
            buf.push(h);
        }
        std::vector<double> raw(d);
        const double rscale = scale * std::exp(nd(rng));
        for (auto& x : raw) x = rscale * nd(rng);
        crafting::CraftingConfig cfg;
        cfg.top_k = static_cast<std::size_t>(topk(rng));
        cfg.sparsity_quantile = kappa(rng);
        cfg.noise_sigma = 1e-3;
        const auto res = crafting::craft(raw, buf, cfg, rng);
        orth = std::max(orth, res.trace.max_projection);
        norm_err = std::max(norm_err, std::abs(res.trace.prenoise_norm - res.trace.target_norm));
        if (res.trace.epsilon < cfg.eps_min || res.trace.epsilon > cfg.eps_max) ++eps_out;
        if (res.trace.zero_fraction < cfg.sparsity_quantile - 1.0 / d) ++sparse_bad;
    }
    // Endpoints: s = 0 gives eps_max, s -> infinity gives eps_min.
    crafting::HistoryBuffer buf(4);
    buf.push(std::vector<double>{3, 0});
    buf.push(std::vector<double>{0, 5});
    crafting::CraftingConfig cfg;
    const auto at_mean = crafting::adaptive_intensity(buf, std::vector<double>{0, 4}, cfg);
    const auto far = crafting::adaptive_intensity(buf, std::vector<double>{1e15, 0}, cfg);
    const bool endpoints = at_mean.score == 0.0 && at_mean.epsilon == cfg.eps_max && far.epsilon == cfg.eps_min;
    return {orth <= 1e-8 && norm_err <= 1e-9 && eps_out == 0 && sparse_bad == 0 && endpoints,
            fmt("1000 trials: max projection %.1e, max |pre-noise norm - R| %.1e, eps out of range %d, sparsity "
                "short %d, endpoints %s",
                orth, norm_err, eps_out, sparse_bad, endpoints ? "ok" : "wrong")};
}

// ---------------------------------------------------------------------------
// Desk-profile sweeps shared by criteria 4, 7, 8 and 9.

struct Sweeps {
    experiment::GridResult main;
    experiment::GridResult wide;
    config::Settings main_settings;
    config::Settings wide_settings;
    double main_seconds = 0.0;
    double wide_seconds = 0.0;
};

Sweeps run_sweeps() {
    Sweeps s;
    // Desk profile: mnist8x8, K=5, T=20, seeds 1..3, Grover with m = 1
    // (q = 0.2), rho = 0.9, lambda = 2.
    config::ConfigMap main{{"attack.kind", "grover"},
                           {"attack.rho", "0.9"},
                           {"attack.lambda", "2"},
                           {"grid.attacks", "grover"},
                           {"grid.defenses", "fedavg, mkrum, mudhog"},
                           {"grid.q_values", "0, 0.2"},
                           {"analysis.shadow", "false"}};
    s.main_settings = config::build_settings(main);
    const auto data = data::load_dataset(s.main_settings.base.dataset, s.main_settings.base.seed);
    std::fprintf(stderr, "main sweep: %zu cells x %zu seeds on %zu/%zu samples\n", s.main_settings.grid.cell_count(),
                 s.main_settings.grid.seeds.size(), data.train.size(), data.test.size());
    auto t0 = Clock::now();
    s.main = experiment::run_grid(s.main_settings, data);
    s.main_seconds = seconds_since(t0);

    // Every attack against the remaining rules, short horizon, for the
    // perturbation bound and the stealth audit.
    config::ConfigMap wide{{"federation.rounds", "4"},
                           {"federation.num_seeds", "1"},
                           {"grid.attacks", "grover, pauli, bitflip, signflip"},
                           {"grid.defenses", "fedavg, krum, foolsgold, flguardian"},
                           {"grid.q_values", "0.2, 0.4"},
                           {"attack.rho", "0.9"},
                           {"crafting.window", "4"},
                           {"analysis.shadow", "false"}};
    s.wide_settings = config::build_settings(wide);
    std::fprintf(stderr, "wide sweep: %zu cells x %zu seeds\n", s.wide_settings.grid.cell_count(),
                 s.wide_settings.grid.seeds.size());
    t0 = Clock::now();
    s.wide = experiment::run_grid(s.wide_settings, data);
    s.wide_seconds = seconds_since(t0);
    return s;
}

const experiment::CellResult* find_cell(const experiment::GridResult& g, agg::Rule rule, double q) {
    for (const auto& c : g.cells)
        if (c.defense == rule && c.q == q) return &c;
    return nullptr;
}

std::string cell_errors(const experiment::GridResult& g) {
    std::string out;
    for (const auto& c : g.cells)
        if (!c.error.empty()) out += " [" + std::string(agg::record_name(c.defense)) + " q=" +
                                    config::format_double(c.q) + ": " + c.error + "]";
    return out;
}

Outcome perturbation_bound(const Sweeps& s) {
    std::size_t rounds = 0, violations = 0, clipped = 0;
    for (const auto* g : {&s.main, &s.wide})
        for (const auto& cell : g->cells)
            for (const auto& run : cell.runs) {
                const auto& res = run.result;
                const double q = static_cast<double>(res.malicious.size()) / res.config.clients;
                for (const auto& r : res.rounds) {
                    if (!std::isfinite(r.radius)) continue;
                    ++rounds;
                    for (const auto& c : r.clients) clipped += c.clipped ? 1 : 0;
                    // Independent of the recorded verdict: b^t against q r^t.
                    if (r.b_norm > q * r.radius + 1e-9 || !r.lemma1.pass) ++violations;
                }
            }
    const auto errors = cell_errors(s.main) + cell_errors(s.wide);
    return {violations == 0 && rounds > 0 && errors.empty(),
            fmt("%zu rounds across both sweeps, %zu clipped deltas, %zu violations of ||b|| <= q r", rounds, clipped,
                violations) +
                errors};
}

struct SeedDrop {
    std::uint64_t seed;
    double baseline;
    double attacked;
};

std::vector<SeedDrop> drops(const experiment::GridResult& g, agg::Rule rule) {
    std::vector<SeedDrop> out;
    const auto* cell = find_cell(g, rule, 0.2);
    if (!cell) return out;
    for (const auto& run : cell->runs)
        out.push_back({run.seed, run.baseline_final_accuracy, run.result.final_accuracy()});
    return out;
}

Outcome attack_reproduction(const Sweeps& s) {
    const auto d = drops(s.main, agg::Rule::FedAvg);
    if (d.empty()) return {false, "fedavg q=0.2 cell missing" + cell_errors(s.main)};
    int hit = 0;
    double base = 0.0, att = 0.0;
    std::string per;
    for (const auto& x : d) {
        const double drop = x.baseline - x.attacked;
        hit += drop >= 10.0 ? 1 : 0;
        base += x.baseline;
        att += x.attacked;
        per += fmt(" seed %llu: %.1f -> %.1f (%+.1f pp);", static_cast<unsigned long long>(x.seed), x.baseline,
                   x.attacked, -drop);
    }
    const double n = static_cast<double>(d.size());
    const bool pass = 3 * hit >= 2 * static_cast<int>(d.size());
    return {pass, fmt("mean final %.2f%% -> %.2f%% (drop %.2f pp); seeds with drop >= 10 pp: %d/%zu;", base / n,
                      att / n, (base - att) / n, hit, d.size()) +
                      per + fmt(" main sweep %.0f s", s.main_seconds)};
}

Outcome defense_reproduction(const Sweeps& s) {
    const auto fed = drops(s.main, agg::Rule::FedAvg);
    std::string detail;
    bool any = false;
    for (auto rule : {agg::Rule::MultiKrum, agg::Rule::MudHog}) {
        const auto def = drops(s.main, rule);
        int ok = 0;
        std::string per;
        for (std::size_t i = 0; i < fed.size() && i < def.size(); ++i) {
            const double fed_drop = fed[i].baseline - fed[i].attacked;
            const double recovered = def[i].attacked - fed[i].attacked;
            // Only a real fedavg drop can be recovered.
            const bool seed_ok = fed_drop > 0.0 && recovered >= 0.5 * fed_drop;
            ok += seed_ok ? 1 : 0;
            per += fmt(" %+.1f/%.1f", recovered, fed_drop);
        }
        const bool rule_ok = !def.empty() && 3 * ok >= 2 * static_cast<int>(def.size());
        any = any || rule_ok;
        detail += fmt("%s recovers >= half in %d/%zu seeds (recovered/fedavg drop:", std::string(agg::record_name(rule)).c_str(),
                      ok, def.size()) +
                  per + "); ";
    }
    return {any, detail};
}

Outcome stealth_audit(const Sweeps& s) {
    std::size_t counted = 0, ok = 0;
    for (const auto* g : {&s.main, &s.wide})
        for (const auto& cell : g->cells)
            for (const auto& run : cell.runs)
                for (const auto& r : run.result.rounds)
                    if (r.stealth_norm_ok) {
                        ++counted;
                        ok += *r.stealth_norm_ok ? 1 : 0;
                    }
    const double frac = counted ? static_cast<double>(ok) / counted : 0.0;
    return {counted > 0 && frac >= 0.95,
            fmt("%zu/%zu rounds with crafted deltas inside mean +- 4 std of benign norms (%.1f%%)", ok, counted,
                100.0 * frac)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / ("qfl_accept_" + std::to_string(std::random_device{}()));
    fs::create_directories(root);
    const std::string base = std::string(QFL_CLI_PATH) +
                             " run --attack grover --q 0.2 --rho 0.9 --rounds 3 --seeds 1 --seed 11 "
                             "--set crafting.window=3 --set analysis.theorem1_pairs=2 --set analysis.smoothness_pairs=1";
    std::vector<std::string> csv, manifest;
    bool ran = true;
    for (int i = 0; i < 2; ++i) {
        const auto out = root / ("run" + std::to_string(i));
        const auto cmd = base + " --out " + out.string() + " > /dev/null 2>&1";
        ran = ran && std::system(cmd.c_str()) == 0;
        csv.push_back(slurp(out / "results.csv"));
        manifest.push_back(slurp(out / "manifest.json"));
    }
    fs::remove_all(root);
    const bool same = ran && !csv[0].empty() && csv[0] == csv[1] && manifest[0] == manifest[1];
    return {same, fmt("two CLI executions: results.csv %zu bytes %s, manifest.json %zu bytes %s%s", csv[0].size(),
                      csv[0] == csv[1] ? "identical" : "DIFFER", manifest[0].size(),
                      manifest[0] == manifest[1] ? "identical" : "DIFFER", ran ? "" : " (a run exited non-zero)")};
}

}  // namespace

int main() {
    int failed = 0;
    auto report = [&](int id, const char* name, const Outcome& o) {
        std::printf("criterion %2d %s  %s: %s\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    };
    auto guarded = [](const std::function<Outcome()>& f) {
        try {
            return f();
        } catch (const std::exception& e) {
            return Outcome{false, std::string("exception: ") + e.what()};
        }
    };

    report(1, "quantum correctness suite", guarded(quantum_suite));
    report(2, "gradient fidelity", guarded(gradient_fidelity));
    report(3, "aggregator oracles", guarded(aggregator_oracles));
    report(5, "deviation recursion on a quadratic objective", guarded(deviation_recursion));
    report(6, "crafting invariants", guarded(crafting_invariants));

    Sweeps sweeps;
    std::string sweep_error;
    try {
        sweeps = run_sweeps();
    } catch (const std::exception& e) {
        sweep_error = e.what();
    }
    auto with_sweeps = [&](auto f) {
        return sweep_error.empty() ? guarded([&] { return f(sweeps); })
                                   : Outcome{false, "sweep failed: " + sweep_error};
    };
    report(4, "bounded perturbation under clipping", with_sweeps(perturbation_bound));
    report(7, "Grover attack accuracy drop (fedavg, desk profile)", with_sweeps(attack_reproduction));
    report(8, "defense recovery (mkrum / mudhog-proxy)", with_sweeps(defense_reproduction));
    report(9, "stealth norm audit", with_sweeps(stealth_audit));
    report(10, "determinism", guarded(determinism));

    std::printf("%d of 10 criteria failed\n", failed);
    return failed ? 1 : 0;
}
