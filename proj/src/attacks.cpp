#include "qfl/attacks.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "qfl/errors.hpp"
#include "qfl/rng.hpp"

namespace qfl::attacks {

using qsim::Gate;

std::string_view to_string(AttackKind kind) {
    switch (kind) {
        case AttackKind::None: return "none";
        case AttackKind::Grover: return "grover";
        case AttackKind::Pauli: return "pauli";
        case AttackKind::BitFlip: return "bitflip";
        case AttackKind::SignFlip: return "signflip";
    }
    return "?";
}

std::string_view to_string(InsertionPoint point) {
    switch (point) {
        case InsertionPoint::PreEncoding: return "pre_encoding";
        case InsertionPoint::BeforeFinalBlock: return "before_final_block";
        case InsertionPoint::PostCircuit: return "post_circuit";
    }
    return "?";
}

std::string_view to_string(OracleImpl impl) {
    return impl == OracleImpl::Direct ? "direct" : "ancilla";
}

AttackKind parse_attack_kind(std::string_view t) {
    if (t == "none") return AttackKind::None;
    if (t == "grover") return AttackKind::Grover;
    if (t == "pauli") return AttackKind::Pauli;
    if (t == "bitflip") return AttackKind::BitFlip;
    if (t == "signflip") return AttackKind::SignFlip;
    throw ConfigError("unknown attack '" + std::string(t) + "' (none, grover, pauli, bitflip, signflip)");
}

InsertionPoint parse_insertion_point(std::string_view t) {
    if (t == "pre_encoding") return InsertionPoint::PreEncoding;
    if (t == "before_final_block") return InsertionPoint::BeforeFinalBlock;
    if (t == "post_circuit") return InsertionPoint::PostCircuit;
    throw ConfigError("unknown insertion point '" + std::string(t) + "'");
}

OracleImpl parse_oracle_impl(std::string_view t) {
    if (t == "direct") return OracleImpl::Direct;
    if (t == "ancilla") return OracleImpl::Ancilla;
    throw ConfigError("unknown oracle implementation '" + std::string(t) + "' (direct, ancilla)");
}

AttackConfig AttackConfig::defaults(AttackKind kind, const model::ModelArchitecture& arch) {
    AttackConfig cfg;
    cfg.kind = kind;
    cfg.omega.assign(static_cast<std::size_t>(arch.n_data_wires), 1);
    cfg.wires = arch.data_wires();
    cfg.alphas.assign(cfg.wires.size(), std::numbers::pi / 4.0);
    cfg.insertion = kind == AttackKind::BitFlip ? InsertionPoint::PostCircuit : InsertionPoint::BeforeFinalBlock;
    return cfg;
}

void AttackConfig::validate(const model::ModelArchitecture& arch) const {
    const int nd = arch.n_data_wires;
    auto data_wire = [nd](int w) { return w >= 0 && w < nd; };
    if (!(poison_prob >= 0.0 && poison_prob <= 1.0)) throw ConfigError("poison probability must lie in [0, 1]");
    if (!(loss_scale >= 1.0)) throw ConfigError("loss scale lambda must be >= 1");
    switch (kind) {
        case AttackKind::None:
            break;
        case AttackKind::Grover:
            if (omega.size() != static_cast<std::size_t>(nd))
                throw ConfigError("marked state has " + std::to_string(omega.size()) + " bits for " +
                                  std::to_string(nd) + " data wires");
            for (int b : omega)
                if (b != 0 && b != 1) throw ConfigError("marked state must be a bit string");
            if (oracle == OracleImpl::Ancilla && arch.n_ancilla < 1)
                throw ConfigError("ancilla oracle needs an ancilla wire");
            break;
        case AttackKind::Pauli:
            if (wires.size() != alphas.size()) throw ConfigError("Pauli attack needs one angle per wire");
            for (std::size_t i = 0; i < wires.size(); ++i) {
                if (!data_wire(wires[i])) throw ConfigError("Pauli attack wire outside the data register");
                for (std::size_t j = 0; j < i; ++j)
                    if (wires[i] == wires[j]) throw ConfigError("Pauli attack repeats a wire");
            }
            break;
        case AttackKind::BitFlip:
            if (period < 1) throw ConfigError("bit-flip period must be positive");
            if (!data_wire(target_qubit)) throw ConfigError("bit-flip target outside the data register");
            break;
        case AttackKind::SignFlip:
            if (!data_wire(sign_qubit)) throw ConfigError("sign-flip qubit outside the data register");
            break;
    }
}

std::vector<Gate> grover_oracle_via_ancilla(std::span<const int> omega, std::span<const int> data_wires,
                                            int ancilla) {
    if (omega.size() != data_wires.size())
        throw ConfigError("marked state has " + std::to_string(omega.size()) + " bits for " +
                          std::to_string(data_wires.size()) + " data wires");
    std::vector<Gate> flips;
    for (std::size_t i = 0; i < omega.size(); ++i) {
        if (omega[i] != 0 && omega[i] != 1) throw ConfigError("marked state must be a bit string");
        if (omega[i] == 0) flips.push_back(Gate::x(data_wires[i]));
    }
    std::vector<Gate> seq = flips;
    seq.push_back(Gate::x(ancilla));
    seq.push_back(Gate::h(ancilla));
    seq.push_back(Gate::mcx(std::vector<int>(data_wires.begin(), data_wires.end()), ancilla));
    seq.push_back(Gate::h(ancilla));
    seq.push_back(Gate::x(ancilla));
    seq.insert(seq.end(), flips.begin(), flips.end());
    return seq;
}

Gate grover_oracle_direct(std::span<const int> omega, std::span<const int> data_wires) {
    if (omega.size() != data_wires.size())
        throw ConfigError("marked state has " + std::to_string(omega.size()) + " bits for " +
                          std::to_string(data_wires.size()) + " data wires");
    return Gate::phase_oracle(std::vector<int>(data_wires.begin(), data_wires.end()),
                              std::vector<int>(omega.begin(), omega.end()));
}

std::vector<Gate> attack_block(const AttackConfig& cfg, const model::ModelArchitecture& arch, long round) {
    cfg.validate(arch);
    std::vector<Gate> block;
    const auto data = arch.data_wires();
    switch (cfg.kind) {
        case AttackKind::None:
            break;
        case AttackKind::Grover:
            if (cfg.oracle == OracleImpl::Ancilla)
                block = grover_oracle_via_ancilla(cfg.omega, data, arch.ancilla_wire());
            else
                block.push_back(grover_oracle_direct(cfg.omega, data));
            break;
        case AttackKind::Pauli:
            // e^{-i alpha X} is RX(2 alpha) in the half-angle convention.
            for (std::size_t i = 0; i < cfg.wires.size(); ++i) block.push_back(Gate::rx(cfg.wires[i], 2.0 * cfg.alphas[i]));
            break;
        case AttackKind::BitFlip:
            if (round % cfg.period == 0) block.push_back(Gate::x(cfg.target_qubit));
            break;
        case AttackKind::SignFlip:
            block.push_back(Gate::phase(cfg.sign_qubit, cfg.phase));
            break;
    }
    return block;
}

qsim::CircuitTemplate build_attack_circuit(const qsim::CircuitTemplate& clean, const AttackConfig& cfg,
                                           const model::ModelArchitecture& arch, long round) {
    const auto block = attack_block(cfg, arch, round);
    if (block.empty()) return clean;
    qsim::CircuitTemplate out = clean;
    std::size_t pos = 0;
    switch (cfg.insertion) {
        case InsertionPoint::PreEncoding: pos = 0; break;
        case InsertionPoint::BeforeFinalBlock: pos = clean.final_block_begin(); break;
        case InsertionPoint::PostCircuit: pos = clean.gates().size(); break;
    }
    out.insert(pos, block);
    return out;
}

PoisonSchedule::PoisonSchedule(std::uint64_t seed, double rho) : seed_(seed), rho_(rho) {
    if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("poison probability must lie in [0, 1]");
}

int PoisonSchedule::draw(std::uint64_t client, long round) const {
    const auto h = derive_seed(seed_, {stream::kPoison, client, static_cast<std::uint64_t>(round)});
    return unit_interval(h) < rho_ ? 1 : 0;
}

int gate_poison_round(const PoisonSchedule& schedule, std::uint64_t client, long round) {
    return schedule.draw(client, round);
}

double effective_loss_scale(int poisoned, double lambda) {
    if (!(lambda >= 1.0)) throw ConfigError("loss scale lambda must be >= 1");
    return poisoned ? lambda : 1.0;
}

}  // namespace qfl::attacks
