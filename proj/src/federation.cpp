#include "qfl/federation.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <iostream>
#include <limits>
#include <numeric>

#include "qfl/errors.hpp"

namespace qfl::fed {

namespace {

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

}  // namespace

attacks::AttackConfig AttackSettings::resolve(const model::ModelArchitecture& arch) const {
    auto cfg = attacks::AttackConfig::defaults(kind, arch);
    if (omega) cfg.omega = *omega;
    if (wires) cfg.wires = *wires;
    if (alphas) cfg.alphas = *alphas;
    if (wires && !alphas) cfg.alphas.assign(cfg.wires.size(), cfg.alphas.empty() ? 0.0 : cfg.alphas.front());
    cfg.period = period;
    cfg.target_qubit = target_qubit;
    cfg.sign_qubit = sign_qubit;
    cfg.phase = phase;
    cfg.poison_prob = poison_prob;
    cfg.loss_scale = loss_scale;
    if (insertion) cfg.insertion = *insertion;
    cfg.oracle = oracle;
    cfg.validate(arch);
    return cfg;
}

int FederationConfig::malicious_count() const {
    if (malicious_fraction <= 0.0) return 0;
    const auto m = static_cast<int>(std::lround(malicious_fraction * clients));
    return std::clamp(m, 1, clients);
}

void FederationConfig::validate() const {
    if (clients < 1) throw ConfigError("federation.clients must be at least 1");
    if (!(malicious_fraction >= 0.0 && malicious_fraction <= 1.0))
        throw ConfigError("federation.malicious_fraction must lie in [0, 1]");
    if (rounds < 0) throw ConfigError("federation.rounds must be non-negative");
    if (local_epochs < 1) throw ConfigError("federation.local_epochs must be at least 1");
    if (!(client_lr > 0.0)) throw ConfigError("federation.client_lr must be positive");
    if (!(server_lr > 0.0)) throw ConfigError("federation.server_lr must be positive");
    if (!(dirichlet_alpha > 0.0)) throw ConfigError("federation.dirichlet_alpha must be positive");
    if (batch_size < 1) throw ConfigError("federation.batch_size must be at least 1");
    if (shots < 0) throw ConfigError("federation.shots must be non-negative");
    if (threads < 1) throw ConfigError("federation.threads must be at least 1");
    if (depth && *depth < 1) throw ConfigError("model.depth must be at least 1");
    if (!(attack.poison_prob >= 0.0 && attack.poison_prob <= 1.0))
        throw ConfigError("attack.rho must lie in [0, 1]");
    if (attack.loss_scale < 1.0) throw ConfigError("attack.lambda must be at least 1");
    crafting.validate();
    if (malicious_fraction > 0.5)
        std::cerr << "warning: malicious fraction " << malicious_fraction << " exceeds 0.5\n";
}

model::ModelArchitecture FederationConfig::architecture(const Batch& train) const {
    model::ModelArchitecture arch = dataset.id == data::DatasetId::Cifar10 ? model::ModelArchitecture::cifar()
                                                                            : model::ModelArchitecture::mnist();
    arch.input_dim = train.input_dim;
    arch.n_classes = train.n_classes;
    if (depth) arch.entangling_depth = *depth;
    arch.validate();
    return arch;
}

FederationConfig FederationConfig::neutralized() const {
    FederationConfig c = *this;
    c.attack.kind = attacks::AttackKind::None;
    c.crafting.enabled = false;
    return c;
}

std::vector<std::vector<std::size_t>> dirichlet_partition(std::span<const int> labels, int clients, double alpha,
                                                          Rng& rng) {
    if (clients < 1) throw ConfigError("partition needs at least one client");
    if (!(alpha > 0.0)) throw ConfigError("dirichlet alpha must be positive");
    if (labels.size() < static_cast<std::size_t>(clients))
        throw ConfigError("dataset of " + std::to_string(labels.size()) + " samples is smaller than " +
                          std::to_string(clients) + " clients");
    const int n_classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(std::max(n_classes, 0)));
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[static_cast<std::size_t>(labels[i])].push_back(i);

    const auto K = static_cast<std::size_t>(clients);
    std::gamma_distribution<double> gamma(alpha, 1.0);
    std::vector<std::vector<std::size_t>> parts;
    for (int attempt = 0; attempt < 100; ++attempt) {
        parts.assign(K, {});
        for (auto idx : by_class) {
            std::shuffle(idx.begin(), idx.end(), rng);
            std::vector<double> share(K);
            double total = 0.0;
            for (auto& s : share) total += (s = gamma(rng));
            if (!(total > 0.0)) std::fill(share.begin(), share.end(), 1.0), total = static_cast<double>(K);
            std::size_t start = 0;
            double cum = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                cum += share[k] / total;
                const std::size_t end =
                    k + 1 == K ? idx.size()
                               : std::min(idx.size(), static_cast<std::size_t>(cum * static_cast<double>(idx.size())));
                for (std::size_t i = start; i < std::max(start, end); ++i) parts[k].push_back(idx[i]);
                start = std::max(start, end);
            }
        }
        if (std::none_of(parts.begin(), parts.end(), [](const auto& p) { return p.empty(); })) break;
    }
    for (auto& p : parts) {
        if (!p.empty()) continue;
        auto& donor = *std::max_element(parts.begin(), parts.end(),
                                        [](const auto& a, const auto& b) { return a.size() < b.size(); });
        p.push_back(donor.back());
        donor.pop_back();
    }
    for (auto& p : parts) std::sort(p.begin(), p.end());
    return parts;
}

std::vector<int> malicious_ids(int clients, int m, std::uint64_t seed) {
    std::vector<int> ids(static_cast<std::size_t>(clients));
    std::iota(ids.begin(), ids.end(), 0);
    Rng rng(derive_seed(seed, {stream::kMalicious}));
    std::shuffle(ids.begin(), ids.end(), rng);
    ids.resize(static_cast<std::size_t>(std::clamp(m, 0, clients)));
    std::sort(ids.begin(), ids.end());
    return ids;
}

namespace {

struct ClientOutcome {
    ClientRecord rec;
    std::vector<double> sent;
    std::vector<double> history_entry;  // pushed after the round (attackers only)
};

struct RunContext {
    const FederationConfig& cfg;
    const model::ModelArchitecture& arch;
    const attacks::AttackConfig& attack;
    const qsim::CircuitTemplate& clean;
    const attacks::PoisonSchedule& schedule;
    model::LocalTrainConfig train;
};

ClientOutcome client_step(const RunContext& ctx, const model::ModelParams& theta, const Batch& local, int k,
                          long t, bool malicious, const crafting::HistoryBuffer* history) {
    ClientOutcome out;
    out.rec.client_id = k;
    out.rec.malicious = malicious;
    const bool attacking = malicious && ctx.attack.kind != attacks::AttackKind::None;
    const auto ck = static_cast<std::uint64_t>(k);
    const auto ct = static_cast<std::uint64_t>(t);
    Rng rng(derive_seed(ctx.cfg.seed, {stream::kClientTrain, ck, ct}));
    try {
        if (!attacking) {
            out.sent = model::local_train(theta, local, ctx.clean, 1.0, ctx.train, rng).delta;
            out.rec.raw_norm = out.rec.sent_norm = norm2(out.sent);
            return out;
        }
        out.rec.poisoned = attacks::gate_poison_round(ctx.schedule, ck, t);
        const auto circuit =
            out.rec.poisoned ? attacks::build_attack_circuit(ctx.clean, ctx.attack, ctx.arch, t) : ctx.clean;
        const double scale = attacks::effective_loss_scale(out.rec.poisoned, ctx.attack.loss_scale);
        auto raw = model::local_train(theta, local, circuit, scale, ctx.train, rng).delta;
        out.rec.raw_norm = norm2(raw);
        if (out.rec.poisoned && ctx.cfg.crafting.enabled) {
            // Honest reference update on the attacker's own data; it feeds the
            // history so camouflage tracks benign-looking norms.
            Rng ref_rng(derive_seed(ctx.cfg.seed, {stream::kCraft, ck, ct, 1}));
            out.history_entry = model::local_train(theta, local, ctx.clean, 1.0, ctx.train, ref_rng).delta;
            Rng craft_rng(derive_seed(ctx.cfg.seed, {stream::kCraft, ck, ct}));
            auto crafted = crafting::craft(raw, *history, ctx.cfg.crafting, craft_rng);
            out.rec.craft = crafted.trace;
            out.sent = std::move(crafted.delta);
        } else {
            if (!out.rec.poisoned) out.history_entry = raw;
            out.sent = std::move(raw);
        }
        out.rec.sent_norm = norm2(out.sent);
    } catch (const NumericFault& e) {
        out.rec.faulted = true;
        out.sent.clear();
        std::cerr << "round " << t << ": client " << k << " skipped: " << e.what() << "\n";
    }
    return out;
}

std::vector<std::size_t> evenly_spaced(std::size_t n, std::size_t k) {
    std::vector<std::size_t> out;
    if (n == 0 || k == 0) return out;
    k = std::min(k, n);
    for (std::size_t i = 0; i < k; ++i) out.push_back(k == 1 ? n - 1 : (i * (n - 1)) / (k - 1));
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

void trajectory_diagnostics(ExperimentResult& res, const ExperimentResult& twin, const data::Split& data,
                            const qsim::CircuitTemplate& clean) {
    const auto& cfg = res.config;
    const auto manifest = model::ParamManifest::for_architecture(res.arch);
    std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs;
    for (auto t : evenly_spaced(res.thetas.size(), static_cast<std::size_t>(std::max(cfg.analysis.theorem1_pairs, 0))))
        pairs.emplace_back(res.thetas[t], twin.thetas[t]);

    std::vector<double> devs{distance(res.thetas.front(), twin.thetas.front())};
    std::vector<double> bnorms;
    for (const auto& r : res.rounds) {
        devs.push_back(r.deviation.value_or(0.0));
        bnorms.push_back(r.b_norm);
    }
    if (cfg.analysis.smoothness_pairs > 0 && !pairs.empty()) {
        Rng rng(derive_seed(cfg.seed, {stream::kProbe}));
        const auto probe = data::random_subset(data.train, cfg.analysis.smoothness_subset, rng);
        std::vector<std::pair<std::vector<double>, std::vector<double>>> sp;
        for (auto i : evenly_spaced(pairs.size(), static_cast<std::size_t>(cfg.analysis.smoothness_pairs)))
            sp.push_back(pairs[i]);
        res.smoothness_estimate = analysis::estimate_smoothness(sp, manifest, clean, probe);
        res.prop1 = analysis::proposition1_check(devs, bnorms, res.smoothness_estimate, cfg.server_lr);
    }
    if (cfg.analysis.theorem1_pairs > 0) {
        res.theorem1 = analysis::theorem1_statistics(model::ModelParams{manifest, twin.thetas.back()},
                                                     model::ModelParams{manifest, res.thetas.back()}, clean,
                                                     data.test, pairs);
    }
}

}  // namespace

ExperimentResult run_experiment(const FederationConfig& cfg, const data::Split& data, const ExperimentResult* twin) {
    cfg.validate();
    ExperimentResult res;
    res.config = cfg;
    res.arch = cfg.architecture(data.train);
    const auto& arch = res.arch;
    const auto attack = cfg.attack.resolve(arch);
    const auto clean = model::clean_template(arch);
    const attacks::PoisonSchedule schedule(derive_seed(cfg.seed, {stream::kPoison}), attack.poison_prob);

    Rng part_rng(derive_seed(cfg.seed, {stream::kPartition}));
    const auto parts = dirichlet_partition(data.train.labels, cfg.clients, cfg.dirichlet_alpha, part_rng);
    std::vector<Batch> local;
    for (const auto& p : parts) {
        local.push_back(data.train.subset(p));
        res.partition_sizes.push_back(p.size());
    }
    res.malicious = malicious_ids(cfg.clients, cfg.malicious_count(), cfg.seed);
    auto is_mal = [&](int k) { return std::binary_search(res.malicious.begin(), res.malicious.end(), k); };

    Rng init_rng(derive_seed(cfg.seed, {stream::kInit}));
    auto theta = model::init_params(arch, init_rng, cfg.init);
    res.thetas.push_back(theta.flat);
    const auto e0 = model::evaluate(theta, clean, data.test);
    res.initial_accuracy = e0.accuracy;
    res.initial_loss = e0.mean_loss;

    RunContext ctx{cfg, arch, attack, clean, schedule, {}};
    ctx.train.epochs = cfg.local_epochs;
    ctx.train.batch_size = cfg.batch_size;
    ctx.train.optimizer = {cfg.client_lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, cfg.weight_decay};
    ctx.train.shots = cfg.shots;

    agg::Aggregator aggregator(cfg.defense, cfg.defense_opts, cfg.malicious_fraction);
    std::vector<crafting::HistoryBuffer> histories(static_cast<std::size_t>(cfg.clients),
                                                   crafting::HistoryBuffer(cfg.crafting.window));

    for (long t = 0; t < cfg.rounds; ++t) {
        RoundRecord rec;
        rec.round = t;

        std::vector<ClientOutcome> outs(static_cast<std::size_t>(cfg.clients));
        auto step = [&](int k) {
            outs[static_cast<std::size_t>(k)] =
                client_step(ctx, theta, local[static_cast<std::size_t>(k)], k, t, is_mal(k),
                            &histories[static_cast<std::size_t>(k)]);
        };
        if (cfg.threads <= 1) {
            for (int k = 0; k < cfg.clients; ++k) step(k);
        } else {
            for (int k0 = 0; k0 < cfg.clients; k0 += cfg.threads) {
                std::vector<std::future<void>> jobs;
                for (int k = k0; k < std::min(cfg.clients, k0 + cfg.threads); ++k)
                    jobs.push_back(std::async(std::launch::async, step, k));
                for (auto& j : jobs) j.get();
            }
        }
        for (int k = 0; k < cfg.clients; ++k) {
            auto& o = outs[static_cast<std::size_t>(k)];
            if (!o.history_entry.empty()) histories[static_cast<std::size_t>(k)].push(o.history_entry);
        }

        // Benign norm statistics over the clients that reported.
        std::vector<double> benign_norms;
        std::vector<agg::ClientUpdate> benign_updates;
        for (const auto& o : outs)
            if (!o.rec.faulted && !o.rec.malicious) {
                benign_norms.push_back(o.rec.sent_norm);
                benign_updates.push_back({o.rec.client_id, t, o.sent, 1.0});
            }
        if (!benign_norms.empty()) {
            const double n = static_cast<double>(benign_norms.size());
            rec.benign_norm_mean = std::accumulate(benign_norms.begin(), benign_norms.end(), 0.0) / n;
            double var = 0.0;
            for (double x : benign_norms) var += (x - rec.benign_norm_mean) * (x - rec.benign_norm_mean);
            rec.benign_norm_std = std::sqrt(var / n);
            rec.radius = rec.benign_norm_mean + 3.0 * rec.benign_norm_std;
        } else {
            rec.radius = std::numeric_limits<double>::infinity();
        }

        analysis::StealthSetParams stealth{{}, rec.radius, cfg.analysis.stealth_kappa};
        if (!benign_updates.empty()) stealth.center = agg::coordinate_median(benign_updates);

        std::vector<agg::ClientUpdate> updates;
        for (auto& o : outs) {
            if (o.rec.faulted) {
                rec.clients.push_back(o.rec);
                continue;
            }
            if (o.rec.malicious && attack.kind != attacks::AttackKind::None && cfg.analysis.lemma1_clip &&
                std::isfinite(rec.radius) &&
                o.rec.sent_norm > rec.radius) {
                analysis::clip_to_radius(o.sent, rec.radius);
                o.rec.clipped = true;
                o.rec.sent_norm = norm2(o.sent);
            }
            if (o.rec.malicious) {
                rec.stealth.push_back(analysis::stealth_membership(o.sent, stealth));
                if (o.rec.craft && !o.rec.craft->bypassed && !benign_norms.empty()) {
                    const bool ok = std::abs(o.rec.sent_norm - rec.benign_norm_mean) <= 4.0 * rec.benign_norm_std;
                    rec.stealth_norm_ok = rec.stealth_norm_ok.value_or(true) && ok;
                }
            }
            rec.clients.push_back(o.rec);
            updates.push_back({o.rec.client_id, t, std::move(o.sent), 1.0});
        }
        if (updates.empty()) throw ProtocolError("round " + std::to_string(t) + ": every client faulted");
        agg::normalize_weights(updates);

        const std::size_t d = theta.flat.size();
        rec.benign_aggregate.assign(d, 0.0);
        rec.perturbation.assign(d, 0.0);
        std::vector<agg::ClientUpdate> mal_updates;
        double q_weight = 0.0;
        for (const auto& u : updates) {
            auto& target = is_mal(u.client_id) ? rec.perturbation : rec.benign_aggregate;
            for (std::size_t i = 0; i < d; ++i) target[i] += u.weight * u.delta[i];
            if (is_mal(u.client_id)) {
                mal_updates.push_back(u);
                q_weight += u.weight;
            }
        }
        rec.g_norm = norm2(rec.benign_aggregate);
        rec.b_norm = norm2(rec.perturbation);
        {
            const auto avg = agg::fedavg(updates);
            double r = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                const double e = avg[i] - (rec.benign_aggregate[i] + rec.perturbation[i]);
                r += e * e;
            }
            rec.decomposition_residual = std::sqrt(r);
        }
        if (std::isfinite(rec.radius)) rec.lemma1 = analysis::lemma1_check(mal_updates, rec.radius, q_weight);

        rec.applied = aggregator.aggregate(updates);
        rec.applied_norm = norm2(rec.applied);
        try {
            agg::server_apply(theta.flat, rec.applied, cfg.server_lr);
        } catch (const NumericFault& e) {
            rec.rejected = true;
            std::cerr << "round " << t << ": aggregate rejected: " << e.what() << "\n";
        }
        res.thetas.push_back(theta.flat);

        const auto ev = model::evaluate(theta, clean, data.test);
        rec.accuracy = ev.accuracy;
        rec.loss = ev.mean_loss;
        if (twin && static_cast<std::size_t>(t + 1) < twin->thetas.size())
            rec.deviation = distance(theta.flat, twin->thetas[static_cast<std::size_t>(t + 1)]);
        res.rounds.push_back(std::move(rec));
    }

    if (twin && twin->thetas.size() == res.thetas.size()) trajectory_diagnostics(res, *twin, data, clean);
    return res;
}

ShadowPair shadow_benign_run(const FederationConfig& cfg, const data::Split& data) {
    ShadowPair pair;
    pair.benign = run_experiment(cfg.neutralized(), data);
    pair.attacked = run_experiment(cfg, data, &pair.benign);
    return pair;
}

}  // namespace qfl::fed
