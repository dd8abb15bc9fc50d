#include "qfl/experiment.hpp"

#include <cmath>
#include <fstream>
#include <future>
#include <map>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace qfl::experiment {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using config::format_double;

fed::FederationConfig cell_config(const fed::FederationConfig& base, attacks::AttackKind attack, agg::Rule defense,
                                  double q, double rho, std::uint64_t seed) {
    auto c = base;
    c.attack.kind = attack;
    c.defense = defense;
    c.malicious_fraction = q;
    c.attack.poison_prob = rho;
    c.seed = seed;
    return c;
}

namespace {

/// Attack-free runs share a trajectory whenever defense, seed and (for the
/// Krum family) the resolved f agree.
std::string trajectory_key(const fed::FederationConfig& c) {
    std::string key = std::string(agg::to_string(c.defense)) + "|" + std::to_string(c.seed);
    const bool krum_family = c.defense == agg::Rule::Krum || c.defense == agg::Rule::MultiKrum;
    if (krum_family && c.defense_opts.krum_f < 0)
        key += "|f" + std::to_string(static_cast<int>(std::ceil(c.malicious_fraction * c.clients - 1e-9)));
    return key;
}

template <class F>
void parallel_for(std::size_t n, int jobs, F fn) {
    if (jobs <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    for (std::size_t i0 = 0; i0 < n; i0 += static_cast<std::size_t>(jobs)) {
        std::vector<std::future<void>> batch;
        for (std::size_t i = i0; i < std::min(n, i0 + static_cast<std::size_t>(jobs)); ++i)
            batch.push_back(std::async(std::launch::async, fn, i));
        for (auto& b : batch) b.get();
    }
}

struct Job {
    fed::FederationConfig cfg;
    std::string twin_key;  // empty: no twin
    std::optional<fed::ExperimentResult> result;
    std::string error;
};

}  // namespace

GridResult run_grid(const config::Settings& settings, const data::Split& data) {
    const auto& g = settings.grid;
    const auto& base = settings.base;
    GridResult out;
    out.dataset = std::string(data::to_string(base.dataset.id));
    out.train_size = data.train.size();
    out.test_size = data.test.size();

    // Attack-free trajectories: q = 0 baselines, plus twins when requested.
    std::map<std::string, Job> neutral;
    auto want_neutral = [&](const fed::FederationConfig& c) {
        auto n = c.neutralized();
        const auto key = trajectory_key(n);
        if (!neutral.contains(key)) neutral.emplace(key, Job{n, {}, {}, {}});
        return key;
    };
    std::map<std::pair<int, std::uint64_t>, std::string> baseline_key;
    for (auto d : g.defenses)
        for (auto s : g.seeds)
            baseline_key[{static_cast<int>(d), s}] =
                want_neutral(cell_config(base, attacks::AttackKind::None, d, 0.0, base.attack.poison_prob, s));

    std::vector<Job> attacked;
    std::vector<std::pair<std::size_t, std::size_t>> slot;  // (cell, seed index) per attacked job
    for (auto a : g.attacks)
        for (auto d : g.defenses)
            for (double q : g.q_values)
                for (double rho : g.rho_values) {
                    CellResult cell{a, d, q, rho, {}, {}};
                    for (std::size_t si = 0; si < g.seeds.size(); ++si) {
                        auto c = cell_config(base, a, d, q, rho, g.seeds[si]);
                        if (q == 0.0) continue;  // the baseline itself
                        Job j{c, base.analysis.shadow ? want_neutral(c) : std::string(), {}, {}};
                        attacked.push_back(std::move(j));
                        slot.emplace_back(out.cells.size(), si);
                    }
                    out.cells.push_back(std::move(cell));
                }

    std::vector<Job*> nj;
    for (auto& [k, j] : neutral) nj.push_back(&j);
    parallel_for(nj.size(), g.jobs, [&](std::size_t i) {
        try {
            nj[i]->result = fed::run_experiment(nj[i]->cfg, data);
        } catch (const std::exception& e) {
            nj[i]->error = e.what();
        }
    });
    parallel_for(attacked.size(), g.jobs, [&](std::size_t i) {
        auto& j = attacked[i];
        const fed::ExperimentResult* twin = nullptr;
        if (!j.twin_key.empty()) {
            const auto& tj = neutral.at(j.twin_key);
            if (tj.result) twin = &*tj.result;
        }
        try {
            j.result = fed::run_experiment(j.cfg, data, twin);
            j.result->thetas.clear();
            j.result->thetas.shrink_to_fit();
        } catch (const std::exception& e) {
            j.error = e.what();
        }
    });

    // Assemble in declaration order.
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> job_of;
    for (std::size_t i = 0; i < slot.size(); ++i) job_of[slot[i]] = i;
    for (std::size_t ci = 0; ci < out.cells.size(); ++ci) {
        auto& cell = out.cells[ci];
        for (std::size_t si = 0; si < g.seeds.size(); ++si) {
            const auto s = g.seeds[si];
            const auto& bj = neutral.at(baseline_key.at({static_cast<int>(cell.defense), s}));
            if (!bj.error.empty()) {
                cell.error = "baseline: " + bj.error;
                continue;
            }
            SeedRun run;
            run.seed = s;
            run.baseline_final_accuracy = bj.result->final_accuracy();
            if (cell.q == 0.0) {
                run.result = *bj.result;
                run.result.config = cell_config(base, cell.attack, cell.defense, cell.q, cell.rho, s);
                run.result.thetas.clear();
            } else {
                auto& j = attacked[job_of.at({ci, si})];
                if (!j.error.empty()) {
                    cell.error = j.error;
                    continue;
                }
                run.result = std::move(*j.result);
            }
            cell.runs.push_back(std::move(run));
        }
    }
    return out;
}

std::vector<SummaryRow> summarize(const GridResult& grid) {
    std::vector<SummaryRow> rows;
    for (const auto& cell : grid.cells) {
        SummaryRow r;
        r.dataset = grid.dataset;
        r.attack = cell.attack;
        r.defense = cell.defense;
        r.q = cell.q;
        r.rho = cell.rho;
        r.seeds = cell.runs.size();
        r.status = cell.error.empty() ? "ok" : "error: " + cell.error;
        std::vector<double> acc, loss, dev, bn, finals, base;
        for (const auto& run : cell.runs) {
            for (const auto& rr : run.result.rounds) {
                acc.push_back(rr.accuracy);
                loss.push_back(rr.loss);
                bn.push_back(rr.b_norm);
                if (rr.deviation) dev.push_back(*rr.deviation);
            }
            finals.push_back(run.result.final_accuracy());
            base.push_back(run.baseline_final_accuracy);
        }
        auto mean = [](const std::vector<double>& v) {
            return v.empty() ? std::nan("") : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        };
        auto stdev = [&](const std::vector<double>& v) {
            if (v.empty()) return std::nan("");
            const double m = mean(v);
            double s = 0.0;
            for (double x : v) s += (x - m) * (x - m);
            return std::sqrt(s / static_cast<double>(v.size()));
        };
        r.rows = acc.size();
        r.accuracy_mean = mean(acc);
        r.accuracy_std = stdev(acc);
        r.loss_mean = mean(loss);
        r.final_accuracy_mean = mean(finals);
        r.final_accuracy_std = stdev(finals);
        r.baseline_accuracy_mean = mean(base);
        r.accuracy_drop = cell.q == 0.0 ? 0.0 : r.baseline_accuracy_mean - r.final_accuracy_mean;
        if (!dev.empty()) r.deviation_mean = mean(dev);
        r.b_norm_mean = mean(bn);
        rows.push_back(std::move(r));
    }
    return rows;
}

namespace {

std::ofstream open_out(const fs::path& p) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    return f;
}

void close_out(std::ofstream& f, const fs::path& p) {
    f.flush();
    if (!f) throw std::runtime_error("write failed for " + p.string());
}

std::string num(double v) { return std::isfinite(v) ? format_double(v) : std::string(); }

std::string csv_field(std::string s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

json finite(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json craft_json(const crafting::CraftTrace& t) {
    return {{"bypassed", t.bypassed},           {"substituted_anchor", t.substituted_anchor},
            {"anchor_index", t.anchor_index},   {"raw_norm", t.raw_norm},
            {"residual_norm", t.residual_norm}, {"projected_norm", t.projected_norm},
            {"score", finite(t.score)},         {"epsilon", t.epsilon},
            {"target_norm", t.target_norm},     {"prenoise_norm", t.prenoise_norm},
            {"output_norm", t.output_norm},     {"zero_fraction", t.zero_fraction},
            {"max_projection", t.max_projection}};
}

json round_json(const fed::RoundRecord& r) {
    json clients = json::array();
    for (const auto& c : r.clients) {
        json cj = {{"id", c.client_id},       {"malicious", c.malicious}, {"poisoned", c.poisoned},
                   {"faulted", c.faulted},    {"clipped", c.clipped},     {"raw_norm", c.raw_norm},
                   {"sent_norm", c.sent_norm}};
        if (c.craft) cj["craft"] = craft_json(*c.craft);
        clients.push_back(std::move(cj));
    }
    json stealth = json::array();
    for (const auto& s : r.stealth)
        stealth.push_back({{"member", s.member}, {"norm", s.norm}, {"cosine", s.cosine}, {"vacuous", s.cosine_vacuous}});
    return {{"round", r.round},
            {"accuracy", r.accuracy},
            {"loss", r.loss},
            {"g_norm", r.g_norm},
            {"b_norm", r.b_norm},
            {"applied_norm", r.applied_norm},
            {"decomposition_residual", r.decomposition_residual},
            {"deviation", r.deviation ? json(*r.deviation) : json(nullptr)},
            {"benign_norm_mean", r.benign_norm_mean},
            {"benign_norm_std", r.benign_norm_std},
            {"radius", finite(r.radius)},
            {"lemma1", {{"b_norm", r.lemma1.b_norm}, {"bound", finite(r.lemma1.bound)}, {"pass", r.lemma1.pass}}},
            {"stealth", stealth},
            {"stealth_norm_ok", r.stealth_norm_ok ? json(*r.stealth_norm_ok) : json(nullptr)},
            {"rejected", r.rejected},
            {"clients", clients}};
}

json run_json(const SeedRun& run) {
    const auto& res = run.result;
    std::size_t l1_fail = 0, stealth_rounds = 0, stealth_ok = 0;
    for (const auto& r : res.rounds) {
        l1_fail += r.lemma1.pass ? 0 : 1;
        if (r.stealth_norm_ok) {
            ++stealth_rounds;
            stealth_ok += *r.stealth_norm_ok ? 1 : 0;
        }
    }
    json j = {{"seed", run.seed},
              {"malicious_ids", res.malicious},
              {"partition_sizes", res.partition_sizes},
              {"initial_accuracy", res.initial_accuracy},
              {"final_accuracy", res.final_accuracy()},
              {"baseline_final_accuracy", run.baseline_final_accuracy},
              {"lemma1_violations", l1_fail},
              {"stealth_rounds", stealth_rounds},
              {"stealth_norm_ok_rounds", stealth_ok}};
    if (res.prop1)
        j["deviation_recursion"] = {{"smoothness_estimate", res.smoothness_estimate},
                                    {"max_residual", res.prop1->max_residual},
                                    {"violations", res.prop1->violations}};
    if (res.theorem1)
        j["margin_band"] = {{"lipschitz", res.theorem1->lipschitz},
                            {"drift", res.theorem1->drift},
                            {"band_fraction", res.theorem1->band_fraction},
                            {"flip_fraction", res.theorem1->flip_fraction}};
    return j;
}

}  // namespace

void emit_results(const GridResult& grid, const config::Settings& settings, const fs::path& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());

    const auto results_path = out_dir / "results.csv";
    auto results = open_out(results_path);
    results << kResultsHeader << "\n";
    for (const auto& cell : grid.cells)
        for (const auto& run : cell.runs)
            for (const auto& r : run.result.rounds)
                results << r.round << ',' << run.seed << ',' << grid.dataset << ',' << attacks::to_string(cell.attack)
                        << ',' << agg::record_name(cell.defense) << ',' << format_double(cell.q) << ','
                        << format_double(cell.rho) << ',' << num(r.accuracy) << ',' << num(r.loss) << ','
                        << (r.deviation ? num(*r.deviation) : std::string()) << ',' << num(r.b_norm) << "\n";
    close_out(results, results_path);

    const auto summary_path = out_dir / "summary.csv";
    auto summary = open_out(summary_path);
    summary << "dataset,attack,defense,q,rho,seeds,rows,accuracy_mean,accuracy_std,loss_mean,final_accuracy_mean,"
               "final_accuracy_std,baseline_accuracy_mean,accuracy_drop,deviation_mean,b_norm_mean,status\n";
    for (const auto& s : summarize(grid))
        summary << s.dataset << ',' << attacks::to_string(s.attack) << ',' << agg::record_name(s.defense) << ','
                << format_double(s.q) << ',' << format_double(s.rho) << ',' << s.seeds << ',' << s.rows << ','
                << num(s.accuracy_mean) << ',' << num(s.accuracy_std) << ',' << num(s.loss_mean) << ','
                << num(s.final_accuracy_mean) << ',' << num(s.final_accuracy_std) << ','
                << num(s.baseline_accuracy_mean) << ',' << num(s.accuracy_drop) << ','
                << (s.deviation_mean ? num(*s.deviation_mean) : std::string()) << ',' << num(s.b_norm_mean) << ','
                << csv_field(s.status) << "\n";
    close_out(summary, summary_path);

    json manifest;
    manifest["config"] = json(config::echo(settings));
    manifest["data"] = {{"dataset", grid.dataset}, {"train_size", grid.train_size}, {"test_size", grid.test_size}};
    json cells = json::array();
    for (const auto& cell : grid.cells) {
        json runs = json::array();
        for (const auto& run : cell.runs) runs.push_back(run_json(run));
        cells.push_back({{"attack", attacks::to_string(cell.attack)},
                         {"defense", agg::record_name(cell.defense)},
                         {"q", cell.q},
                         {"rho", cell.rho},
                         {"error", cell.error},
                         {"runs", runs}});
    }
    manifest["cells"] = cells;
    const auto manifest_path = out_dir / "manifest.json";
    auto mf = open_out(manifest_path);
    mf << manifest.dump(2) << "\n";
    close_out(mf, manifest_path);

    const auto log_path = out_dir / "rounds.jsonl";
    auto log = open_out(log_path);
    for (std::size_t ci = 0; ci < grid.cells.size(); ++ci) {
        const auto& cell = grid.cells[ci];
        for (const auto& run : cell.runs)
            for (const auto& r : run.result.rounds) {
                json line = {{"cell", ci},
                             {"attack", attacks::to_string(cell.attack)},
                             {"defense", agg::record_name(cell.defense)},
                             {"q", cell.q},
                             {"rho", cell.rho},
                             {"seed", run.seed}};
                line.update(round_json(r));
                log << line.dump() << "\n";
            }
    }
    close_out(log, log_path);
}

}  // namespace qfl::experiment
