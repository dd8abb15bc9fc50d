#include "qfl/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "qfl/errors.hpp"

namespace qfl::config {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end || !std::isfinite(out))
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    return out;
}

long long to_int(const std::string& key, const std::string& v) {
    long long out = 0;
    const auto* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) throw ConfigError(key + ": expected an integer, got '" + v + "'");
    return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

template <class T, class F>
std::string join(const std::vector<T>& xs, F f) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + f(xs[i]);
    return out;
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    // A bare bit string ("1011") is accepted for omega-style keys.
    if (v.find(',') == std::string::npos && v.size() > 1 &&
        std::all_of(v.begin(), v.end(), [](char c) { return c == '0' || c == '1'; })) {
        for (char c : v) out.push_back(c - '0');
        return out;
    }
    for (const auto& s : split_list(v)) out.push_back(static_cast<int>(to_int(key, s)));
    return out;
}

std::vector<double> to_double_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& s : split_list(v)) out.push_back(to_double(key, s));
    return out;
}

std::string optional_size(const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : "all"; }

struct Field {
    std::string key;
    std::function<void(Settings&, const std::string&)> set;
    std::function<std::string(const Settings&)> get;
};

std::vector<Field> make_fields() {
    std::vector<Field> f;
    auto add = [&](std::string key, auto set, auto get) { f.push_back({std::move(key), set, get}); };
#define QFL_INT(KEY, MEMBER)                                                                     \
    add(KEY, [](Settings& s, const std::string& v) { s.MEMBER = static_cast<decltype(s.MEMBER)>(to_int(KEY, v)); }, \
        [](const Settings& s) { return std::to_string(s.MEMBER); })
#define QFL_DBL(KEY, MEMBER)                                                         \
    add(KEY, [](Settings& s, const std::string& v) { s.MEMBER = to_double(KEY, v); }, \
        [](const Settings& s) { return format_double(s.MEMBER); })
#define QFL_BOOL(KEY, MEMBER)                                                      \
    add(KEY, [](Settings& s, const std::string& v) { s.MEMBER = to_bool(KEY, v); }, \
        [](const Settings& s) { return from_bool(s.MEMBER); })

    QFL_INT("federation.clients", base.clients);
    QFL_DBL("federation.malicious_fraction", base.malicious_fraction);
    QFL_INT("federation.rounds", base.rounds);
    QFL_INT("federation.local_epochs", base.local_epochs);
    QFL_DBL("federation.client_lr", base.client_lr);
    QFL_DBL("federation.server_lr", base.server_lr);
    QFL_DBL("federation.dirichlet_alpha", base.dirichlet_alpha);
    add("federation.seed", [](Settings& s, const std::string& v) { s.base.seed = to_u64("federation.seed", v); },
        [](const Settings& s) { return std::to_string(s.base.seed); });
    QFL_INT("federation.batch_size", base.batch_size);
    QFL_DBL("federation.weight_decay", base.weight_decay);
    QFL_DBL("federation.adam_beta1", base.adam_beta1);
    QFL_DBL("federation.adam_beta2", base.adam_beta2);
    QFL_DBL("federation.adam_eps", base.adam_eps);
    QFL_INT("federation.shots", base.shots);
    QFL_INT("federation.threads", base.threads);

    add("model.depth",
        [](Settings& s, const std::string& v) {
            if (v == "auto") s.base.depth.reset();
            else s.base.depth = static_cast<int>(to_int("model.depth", v));
        },
        [](const Settings& s) { return s.base.depth ? std::to_string(*s.base.depth) : std::string("auto"); });
    QFL_DBL("model.init_encoder", base.init.encoder);
    QFL_DBL("model.init_quantum", base.init.quantum);
    QFL_DBL("model.init_head", base.init.head);

    add("attack.kind", [](Settings& s, const std::string& v) { s.base.attack.kind = attacks::parse_attack_kind(v); },
        [](const Settings& s) { return std::string(attacks::to_string(s.base.attack.kind)); });
    add("attack.omega",
        [](Settings& s, const std::string& v) {
            if (v == "default") s.base.attack.omega.reset();
            else s.base.attack.omega = to_int_list("attack.omega", v);
        },
        [](const Settings& s) {
            return s.base.attack.omega ? join(*s.base.attack.omega, [](int x) { return std::to_string(x); })
                                       : std::string("default");
        });
    add("attack.wires",
        [](Settings& s, const std::string& v) {
            if (v == "default") s.base.attack.wires.reset();
            else s.base.attack.wires = to_int_list("attack.wires", v);
        },
        [](const Settings& s) {
            return s.base.attack.wires ? join(*s.base.attack.wires, [](int x) { return std::to_string(x); })
                                       : std::string("default");
        });
    add("attack.alphas",
        [](Settings& s, const std::string& v) {
            if (v == "default") s.base.attack.alphas.reset();
            else s.base.attack.alphas = to_double_list("attack.alphas", v);
        },
        [](const Settings& s) {
            return s.base.attack.alphas ? join(*s.base.attack.alphas, format_double) : std::string("default");
        });
    QFL_INT("attack.period", base.attack.period);
    QFL_INT("attack.target_qubit", base.attack.target_qubit);
    QFL_INT("attack.sign_qubit", base.attack.sign_qubit);
    QFL_DBL("attack.phase", base.attack.phase);
    QFL_DBL("attack.rho", base.attack.poison_prob);
    QFL_DBL("attack.lambda", base.attack.loss_scale);
    add("attack.insertion",
        [](Settings& s, const std::string& v) {
            if (v == "default") s.base.attack.insertion.reset();
            else s.base.attack.insertion = attacks::parse_insertion_point(v);
        },
        [](const Settings& s) {
            return s.base.attack.insertion ? std::string(attacks::to_string(*s.base.attack.insertion))
                                           : std::string("default");
        });
    add("attack.oracle", [](Settings& s, const std::string& v) { s.base.attack.oracle = attacks::parse_oracle_impl(v); },
        [](const Settings& s) { return std::string(attacks::to_string(s.base.attack.oracle)); });

    QFL_BOOL("crafting.enabled", base.crafting.enabled);
    QFL_INT("crafting.window", base.crafting.window);
    QFL_INT("crafting.top_k", base.crafting.top_k);
    QFL_DBL("crafting.eps_min", base.crafting.eps_min);
    QFL_DBL("crafting.eps_max", base.crafting.eps_max);
    QFL_DBL("crafting.noise_sigma", base.crafting.noise_sigma);
    QFL_BOOL("crafting.noise_relative", base.crafting.noise_relative);
    QFL_DBL("crafting.sparsity", base.crafting.sparsity_quantile);
    add("crafting.target_norm_rule",
        [](Settings& s, const std::string& v) { s.base.crafting.target_norm_rule = crafting::parse_target_norm_rule(v); },
        [](const Settings& s) { return std::string(crafting::to_string(s.base.crafting.target_norm_rule)); });
    QFL_DBL("crafting.fixed_target_norm", base.crafting.fixed_target_norm);

    add("defense.rule", [](Settings& s, const std::string& v) { s.base.defense = agg::parse_rule(v); },
        [](const Settings& s) { return std::string(agg::to_string(s.base.defense)); });
    add("defense.krum_f",
        [](Settings& s, const std::string& v) {
            s.base.defense_opts.krum_f = v == "auto" ? -1 : static_cast<int>(to_int("defense.krum_f", v));
        },
        [](const Settings& s) {
            return s.base.defense_opts.krum_f < 0 ? std::string("auto") : std::to_string(s.base.defense_opts.krum_f);
        });
    add("defense.mkrum_select",
        [](Settings& s, const std::string& v) {
            s.base.defense_opts.mkrum_select = v == "auto" ? -1 : static_cast<int>(to_int("defense.mkrum_select", v));
        },
        [](const Settings& s) {
            return s.base.defense_opts.mkrum_select < 0 ? std::string("auto")
                                                        : std::to_string(s.base.defense_opts.mkrum_select);
        });
    QFL_DBL("defense.mudhog_separation", base.defense_opts.mudhog.min_separation);
    QFL_DBL("defense.flguardian_z", base.defense_opts.flguardian.z_threshold);
    QFL_DBL("defense.flguardian_min_cosine", base.defense_opts.flguardian.min_cosine);

    add("dataset.id", [](Settings& s, const std::string& v) { s.base.dataset.id = data::parse_dataset_id(v); },
        [](const Settings& s) { return std::string(data::to_string(s.base.dataset.id)); });
    add("dataset.root", [](Settings& s, const std::string& v) { s.base.dataset.root = v; },
        [](const Settings& s) { return s.base.dataset.root; });
    add("dataset.train_subset",
        [](Settings& s, const std::string& v) {
            if (v == "all") s.base.dataset.train_subset.reset();
            else s.base.dataset.train_subset = to_u64("dataset.train_subset", v);
        },
        [](const Settings& s) { return optional_size(s.base.dataset.train_subset); });
    add("dataset.test_subset",
        [](Settings& s, const std::string& v) {
            if (v == "all") s.base.dataset.test_subset.reset();
            else s.base.dataset.test_subset = to_u64("dataset.test_subset", v);
        },
        [](const Settings& s) { return optional_size(s.base.dataset.test_subset); });
    QFL_INT("dataset.blobs_classes", base.dataset.blobs_classes);
    QFL_INT("dataset.blobs_per_class", base.dataset.blobs_per_class);
    QFL_INT("dataset.blobs_test_per_class", base.dataset.blobs_test_per_class);
    QFL_INT("dataset.blobs_dim", base.dataset.blobs_dim);
    QFL_DBL("dataset.blobs_separation", base.dataset.blobs_separation);

    QFL_BOOL("analysis.lemma1_clip", base.analysis.lemma1_clip);
    QFL_DBL("analysis.stealth_kappa", base.analysis.stealth_kappa);
    QFL_BOOL("analysis.shadow", base.analysis.shadow);
    QFL_INT("analysis.theorem1_pairs", base.analysis.theorem1_pairs);
    QFL_INT("analysis.smoothness_pairs", base.analysis.smoothness_pairs);
    QFL_INT("analysis.smoothness_subset", base.analysis.smoothness_subset);

    add("grid.attacks",
        [](Settings& s, const std::string& v) {
            s.grid.attacks.clear();
            for (const auto& x : split_list(v)) s.grid.attacks.push_back(attacks::parse_attack_kind(x));
        },
        [](const Settings& s) {
            return join(s.grid.attacks, [](attacks::AttackKind k) { return std::string(attacks::to_string(k)); });
        });
    add("grid.defenses",
        [](Settings& s, const std::string& v) {
            s.grid.defenses.clear();
            for (const auto& x : split_list(v)) s.grid.defenses.push_back(agg::parse_rule(x));
        },
        [](const Settings& s) { return join(s.grid.defenses, [](agg::Rule r) { return std::string(agg::to_string(r)); }); });
    add("grid.q_values", [](Settings& s, const std::string& v) { s.grid.q_values = to_double_list("grid.q_values", v); },
        [](const Settings& s) { return join(s.grid.q_values, format_double); });
    add("grid.rho_values",
        [](Settings& s, const std::string& v) { s.grid.rho_values = to_double_list("grid.rho_values", v); },
        [](const Settings& s) { return join(s.grid.rho_values, format_double); });
    add("grid.seeds",
        [](Settings& s, const std::string& v) {
            s.grid.seeds.clear();
            for (const auto& x : split_list(v)) s.grid.seeds.push_back(to_u64("grid.seeds", x));
        },
        [](const Settings& s) { return join(s.grid.seeds, [](std::uint64_t x) { return std::to_string(x); }); });
    QFL_INT("grid.jobs", grid.jobs);
#undef QFL_INT
#undef QFL_DBL
#undef QFL_BOOL
    return f;
}

const std::vector<Field>& fields() {
    static const std::vector<Field> f = make_fields();
    return f;
}

}  // namespace

std::vector<std::string> split_list(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto part = trim(text.substr(start, comma == std::string_view::npos ? text.npos : comma - start));
        if (!part.empty()) out.push_back(part);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc() ? std::string(buf, p) : std::string("nan");
}

ConfigMap parse_text(std::string_view text) {
    ConfigMap kv;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        const auto body = trim(std::string_view(line).substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const auto key = trim(std::string_view(body).substr(0, eq));
        const auto value = trim(std::string_view(body).substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        if (!kv.emplace(key, value).second)
            throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    return kv;
}

ConfigMap parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_text(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& f : fields()) k.push_back(f.key);
        k.push_back("federation.num_seeds");
        return k;
    }();
    return keys;
}

Settings build_settings(const ConfigMap& kv) {
    Settings s;
    s.base.dataset.train_subset = 2000;
    s.base.dataset.test_subset = 1000;
    std::size_t num_seeds = 3;
    for (const auto& [key, value] : kv) {
        if (key == "federation.num_seeds") {
            num_seeds = to_u64(key, value);
            if (num_seeds == 0) throw ConfigError("federation.num_seeds must be positive");
            continue;
        }
        const auto it = std::find_if(fields().begin(), fields().end(), [&](const Field& f) { return f.key == key; });
        if (it == fields().end()) throw ConfigError("unknown configuration key '" + key + "'");
        it->set(s, value);
    }
    if (!kv.contains("grid.attacks")) s.grid.attacks = {s.base.attack.kind};
    if (!kv.contains("grid.defenses")) s.grid.defenses = {s.base.defense};
    if (!kv.contains("grid.q_values")) s.grid.q_values = {s.base.malicious_fraction};
    if (!kv.contains("grid.rho_values")) s.grid.rho_values = {s.base.attack.poison_prob};
    if (!kv.contains("grid.seeds"))
        for (std::size_t i = 0; i < num_seeds; ++i) s.grid.seeds.push_back(s.base.seed + i);
    if (s.grid.cell_count() == 0 || s.grid.seeds.empty()) throw ConfigError("experiment grid is empty");
    if (s.grid.jobs < 1) throw ConfigError("grid.jobs must be at least 1");
    s.base.validate();
    return s;
}

ConfigMap paper_scale_overrides() {
    return {{"federation.clients", "20"},
            {"federation.rounds", "100"},
            {"federation.num_seeds", "5"},
            {"federation.client_lr", "0.001"},
            {"dataset.train_subset", "all"},
            {"dataset.test_subset", "all"}};
}

ConfigMap echo(const Settings& s) {
    ConfigMap out;
    for (const auto& f : fields()) out[f.key] = f.get(s);
    return out;
}

}  // namespace qfl::config
