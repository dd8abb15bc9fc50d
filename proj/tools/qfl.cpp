// qfl: command-line front-end for federated runs, sweeps, checks and
// partition audits.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "checks.hpp"
#include "qfl/config.hpp"
#include "qfl/datasets.hpp"
#include "qfl/errors.hpp"
#include "qfl/experiment.hpp"
#include "qfl/federation.hpp"

namespace {

using qfl::config::ConfigMap;

struct CommonFlags {
    std::string config_path;
    std::optional<std::string> dataset, attack, defense;
    std::optional<double> q, rho;
    std::optional<int> rounds, clients, shots, seeds, jobs;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    bool paper_scale = false;
    std::vector<std::string> sets;
};

void add_common(CLI::App* app, CommonFlags& f) {
    app->add_option("--config", f.config_path, "key=value configuration file");
    app->add_option("--dataset", f.dataset, "mnist, mnist8x8, cifar10 or synthetic_blobs");
    app->add_option("--attack", f.attack, "none, grover, pauli, bitflip or signflip");
    app->add_option("--defense", f.defense, "fedavg, krum, mkrum, foolsgold, mudhog or flguardian");
    app->add_option("--q", f.q, "malicious client fraction");
    app->add_option("--rho", f.rho, "poisoning probability per round");
    app->add_option("--rounds", f.rounds, "federated rounds T");
    app->add_option("--clients", f.clients, "client count K");
    app->add_option("--seed", f.seed, "root seed");
    app->add_option("--seeds", f.seeds, "number of consecutive seeds");
    app->add_option("--shots", f.shots, "measurement shots (0 = exact expectations)");
    app->add_option("--jobs", f.jobs, "independent runs executed concurrently");
    app->add_option("--out", f.out, "output directory");
    app->add_flag("--paper-scale", f.paper_scale, "K=20, T=100, five seeds, client lr 1e-3");
    app->add_option("--set", f.sets, "extra key=value override (repeatable)");
}

ConfigMap collect(const CommonFlags& f) {
    ConfigMap kv;
    if (!f.config_path.empty()) kv = qfl::config::parse_file(f.config_path);
    if (f.paper_scale)
        for (const auto& [k, v] : qfl::config::paper_scale_overrides()) kv[k] = v;
    auto put = [&](const char* key, const auto& opt) {
        if (!opt) return;
        if constexpr (std::is_same_v<std::decay_t<decltype(*opt)>, std::string>) kv[key] = *opt;
        else if constexpr (std::is_floating_point_v<std::decay_t<decltype(*opt)>>)
            kv[key] = qfl::config::format_double(*opt);
        else kv[key] = std::to_string(*opt);
    };
    put("dataset.id", f.dataset);
    put("attack.kind", f.attack);
    put("defense.rule", f.defense);
    put("federation.malicious_fraction", f.q);
    put("attack.rho", f.rho);
    put("federation.rounds", f.rounds);
    put("federation.clients", f.clients);
    put("federation.seed", f.seed);
    put("federation.num_seeds", f.seeds);
    put("federation.shots", f.shots);
    put("grid.jobs", f.jobs);
    for (const auto& s : f.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw qfl::ConfigError("--set expects key=value, got '" + s + "'");
        kv[s.substr(0, eq)] = s.substr(eq + 1);
    }
    return kv;
}

int run_or_sweep(const CommonFlags& f, bool sweep) {
    auto kv = collect(f);
    if (!sweep) {
        // A single configuration: grid lists collapse to the base values.
        for (const char* k : {"grid.attacks", "grid.defenses", "grid.q_values", "grid.rho_values"}) kv.erase(k);
    }
    const auto settings = qfl::config::build_settings(kv);
    const auto data = qfl::data::load_dataset(settings.base.dataset, settings.base.seed);
    std::cerr << "dataset " << qfl::data::to_string(settings.base.dataset.id) << ": " << data.train.size()
              << " train / " << data.test.size() << " test; " << settings.grid.cell_count() << " cell(s) x "
              << settings.grid.seeds.size() << " seed(s)\n";
    const auto grid = qfl::experiment::run_grid(settings, data);
    qfl::experiment::emit_results(grid, settings, f.out);
    int failed = 0;
    for (const auto& s : qfl::experiment::summarize(grid)) {
        std::printf("%-9s %-17s q=%-5s rho=%-5s final %.2f%% (baseline %.2f%%, drop %+.2f pp) %s\n",
                    std::string(qfl::attacks::to_string(s.attack)).c_str(),
                    std::string(qfl::agg::record_name(s.defense)).c_str(), qfl::config::format_double(s.q).c_str(),
                    qfl::config::format_double(s.rho).c_str(), s.final_accuracy_mean, s.baseline_accuracy_mean,
                    s.accuracy_drop, s.status.c_str());
        failed += s.status == "ok" ? 0 : 1;
    }
    std::cerr << "results written to " << f.out << "\n";
    return failed ? 2 : 0;
}

int partition_stats(const CommonFlags& f, std::optional<double> alpha) {
    auto kv = collect(f);
    if (alpha) kv["federation.dirichlet_alpha"] = qfl::config::format_double(*alpha);
    const auto settings = qfl::config::build_settings(kv);
    const auto data = qfl::data::load_dataset(settings.base.dataset, settings.base.seed);
    const auto& base = settings.base;
    std::printf("alpha=%s K=%d train=%zu\n", qfl::config::format_double(base.dirichlet_alpha).c_str(), base.clients,
                data.train.size());
    double het_sum = 0.0;
    for (auto seed : settings.grid.seeds) {
        qfl::Rng rng(qfl::derive_seed(seed, {qfl::stream::kPartition}));
        const auto parts = qfl::fed::dirichlet_partition(data.train.labels, base.clients, base.dirichlet_alpha, rng);
        const auto mal = qfl::fed::malicious_ids(base.clients, base.malicious_count(), seed);
        double het = 0.0;
        std::printf("seed %llu (malicious:", static_cast<unsigned long long>(seed));
        for (int m : mal) std::printf(" %d", m);
        std::printf(")\n");
        for (std::size_t k = 0; k < parts.size(); ++k) {
            const auto local = data.train.subset(parts[k]);
            const auto h = local.histogram();
            const double n = static_cast<double>(local.size());
            double mean = 1.0 / static_cast<double>(h.size()), var = 0.0;
            for (auto c : h) var += (static_cast<double>(c) / n - mean) * (static_cast<double>(c) / n - mean);
            var /= static_cast<double>(h.size());
            het += var;
            std::printf("  client %2zu: %5zu samples |", k, local.size());
            for (auto c : h) std::printf(" %4zu", c);
            std::printf(" | class-share variance %.5f\n", var);
        }
        het /= static_cast<double>(parts.size());
        het_sum += het;
        std::printf("  mean class-share variance %.5f\n", het);
    }
    std::printf("mean over seeds %.5f\n", het_sum / static_cast<double>(settings.grid.seeds.size()));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Circuit-level poisoning experiments for quantum federated learning"};
    app.require_subcommand(1);

    CommonFlags run_flags, sweep_flags, part_flags;
    auto* run = app.add_subcommand("run", "train one configuration over its seeds");
    add_common(run, run_flags);
    auto* sweep = app.add_subcommand("sweep", "train every cell of the grid.* lists");
    add_common(sweep, sweep_flags);
    auto* part = app.add_subcommand("partition-stats", "audit the Dirichlet client partition");
    add_common(part, part_flags);
    std::optional<double> alpha;
    part->add_option("--alpha", alpha, "Dirichlet concentration");

    std::uint64_t check_seed = 1;
    int check_trials = 100;
    auto* check = app.add_subcommand("check", "run the invariant and diagnostic suite");
    check->add_option("--seed", check_seed, "root seed");
    check->add_option("--trials", check_trials, "random cases per check");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return run_or_sweep(run_flags, false);
        if (*sweep) return run_or_sweep(sweep_flags, true);
        if (*part) return partition_stats(part_flags, alpha);
        if (*check) {
            int failed = 0;
            for (const auto& r : qfl::tools::run_checks(check_seed, check_trials)) {
                std::printf("[%s] %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
                failed += r.passed ? 0 : 1;
            }
            return failed ? 1 : 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
