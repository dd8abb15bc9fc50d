#include "qfl/qsim.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <numbers>
#include <string>

#include "qfl/errors.hpp"

namespace qfl::qsim {

namespace {

using Mat2 = std::array<Complex, 4>;  // row-major 2x2

constexpr Complex kI{0.0, 1.0};

void apply_single(Statevector& state, int wire, const Mat2& m) {
    auto amps = state.amps();
    const std::size_t stride = state.mask(wire);
    const std::size_t dim = amps.size();
    for (std::size_t base = 0; base < dim; base += 2 * stride) {
        for (std::size_t i = base; i < base + stride; ++i) {
            const Complex a0 = amps[i];
            const Complex a1 = amps[i + stride];
            amps[i] = m[0] * a0 + m[1] * a1;
            amps[i + stride] = m[2] * a0 + m[3] * a1;
        }
    }
}

void apply_diag(Statevector& state, int wire, Complex d0, Complex d1) {
    auto amps = state.amps();
    const std::size_t m = state.mask(wire);
    for (std::size_t i = 0; i < amps.size(); ++i) amps[i] *= (i & m) ? d1 : d0;
}

void apply_controlled_phase(Statevector& state, int control, int target, double phi) {
    const std::size_t both = state.mask(control) | state.mask(target);
    const Complex ph = std::polar(1.0, phi);
    auto amps = state.amps();
    for (std::size_t i = 0; i < amps.size(); ++i)
        if ((i & both) == both) amps[i] *= ph;
}

void apply_swap(Statevector& state, int a, int b) {
    if (a == b) return;
    const std::size_t ma = state.mask(a);
    const std::size_t mb = state.mask(b);
    auto amps = state.amps();
    for (std::size_t i = 0; i < amps.size(); ++i)
        if ((i & ma) && !(i & mb)) std::swap(amps[i], amps[(i & ~ma) | mb]);
}

/// Flips the target wherever all control bits are set.
void apply_multi_controlled_x(Statevector& state, std::span<const int> wires) {
    std::size_t ctrl = 0;
    for (std::size_t k = 0; k + 1 < wires.size(); ++k) ctrl |= state.mask(wires[k]);
    const std::size_t tgt = state.mask(wires.back());
    auto amps = state.amps();
    for (std::size_t i = 0; i < amps.size(); ++i)
        if ((i & ctrl) == ctrl && !(i & tgt)) std::swap(amps[i], amps[i | tgt]);
}

const Mat2 kHadamard = [] {
    const double r = 1.0 / std::numbers::sqrt2;
    return Mat2{r, r, r, -r};
}();

// Textbook QFT circuit on an ordered wire list (wires[0] is the most
// significant bit of the sub-register): H and controlled phases, then the
// bit-reversal swaps.
void apply_qft(Statevector& state, std::span<const int> w) {
    const int m = static_cast<int>(w.size());
    for (int i = 0; i < m; ++i) {
        apply_single(state, w[i], kHadamard);
        for (int j = i + 1; j < m; ++j)
            apply_controlled_phase(state, w[j], w[i], 2.0 * std::numbers::pi / std::ldexp(1.0, j - i + 1));
    }
    for (int i = 0; i < m / 2; ++i) apply_swap(state, w[i], w[m - 1 - i]);
}

void apply_inverse_qft(Statevector& state, std::span<const int> w) {
    const int m = static_cast<int>(w.size());
    for (int i = 0; i < m / 2; ++i) apply_swap(state, w[i], w[m - 1 - i]);
    for (int i = m - 1; i >= 0; --i) {
        for (int j = m - 1; j > i; --j)
            apply_controlled_phase(state, w[j], w[i], -2.0 * std::numbers::pi / std::ldexp(1.0, j - i + 1));
        apply_single(state, w[i], kHadamard);
    }
}

void apply_phase_oracle(Statevector& state, std::span<const int> wires, std::span<const int> marked) {
    std::size_t care = 0;
    std::size_t want = 0;
    for (std::size_t k = 0; k < wires.size(); ++k) {
        care |= state.mask(wires[k]);
        if (marked[k]) want |= state.mask(wires[k]);
    }
    auto amps = state.amps();
    for (std::size_t i = 0; i < amps.size(); ++i)
        if ((i & care) == want) amps[i] = -amps[i];
}

std::size_t arity_min(GateKind kind) {
    switch (kind) {
        case GateKind::CNOT:
        case GateKind::MCX:
            return 2;
        default:
            return 1;
    }
}

bool single_wire(GateKind kind) {
    switch (kind) {
        case GateKind::RX:
        case GateKind::RY:
        case GateKind::RZ:
        case GateKind::Phase:
        case GateKind::X:
        case GateKind::Z:
        case GateKind::H:
            return true;
        default:
            return false;
    }
}

}  // namespace

// ---------------------------------------------------------------------------

Statevector::Statevector(int n_wires) : n_wires_(n_wires) {
    if (n_wires < 1 || n_wires > kMaxWires)
        throw ConfigError("register size " + std::to_string(n_wires) + " outside [1, " +
                          std::to_string(kMaxWires) + "]");
    amps_.assign(std::size_t{1} << n_wires, Complex{0.0, 0.0});
    amps_[0] = 1.0;
}

Statevector Statevector::from_amplitudes(int n_wires, std::vector<Complex> amps) {
    Statevector s(n_wires);
    if (amps.size() != s.dim())
        throw ConfigError("amplitude vector has length " + std::to_string(amps.size()) + ", expected " +
                          std::to_string(s.dim()));
    double n2 = 0.0;
    for (const auto& a : amps) n2 += std::norm(a);
    if (!(n2 > 0.0) || !std::isfinite(n2)) throw ConfigError("cannot normalize a zero or non-finite state");
    const double inv = 1.0 / std::sqrt(n2);
    for (auto& a : amps) a *= inv;
    s.amps_ = std::move(amps);
    return s;
}

double Statevector::norm_squared() const noexcept {
    double n2 = 0.0;
    for (const auto& a : amps_) n2 += std::norm(a);
    return n2;
}

Statevector new_state(int n_wires) { return Statevector(n_wires); }

std::string_view to_string(GateKind kind) {
    switch (kind) {
        case GateKind::RX: return "RX";
        case GateKind::RY: return "RY";
        case GateKind::RZ: return "RZ";
        case GateKind::Phase: return "Phase";
        case GateKind::X: return "X";
        case GateKind::Z: return "Z";
        case GateKind::H: return "H";
        case GateKind::CNOT: return "CNOT";
        case GateKind::MCX: return "MCX";
        case GateKind::QFT: return "QFT";
        case GateKind::InverseQFT: return "InverseQFT";
        case GateKind::PhaseOracle: return "PhaseOracle";
    }
    return "?";
}

Gate Gate::mcx(std::vector<int> controls, int target) {
    controls.push_back(target);
    return {GateKind::MCX, std::move(controls), 0.0, {}, {}, {}};
}

Gate Gate::trainable(GateKind kind, int wire, int slot) {
    Gate g{kind, {wire}, 0.0, slot, {}, {}};
    return g;
}

Gate Gate::encoder(GateKind kind, int wire, int slot) {
    Gate g{kind, {wire}, 0.0, {}, slot, {}};
    return g;
}

void validate(const Gate& gate, int n_wires) {
    const auto name = std::string(to_string(gate.kind));
    if (gate.wires.size() < arity_min(gate.kind))
        throw CircuitError(name + " needs at least " + std::to_string(arity_min(gate.kind)) + " wires");
    if (single_wire(gate.kind) && gate.wires.size() != 1) throw CircuitError(name + " acts on exactly one wire");
    if (gate.kind == GateKind::CNOT && gate.wires.size() != 2) throw CircuitError("CNOT acts on exactly two wires");
    for (std::size_t i = 0; i < gate.wires.size(); ++i) {
        const int w = gate.wires[i];
        if (w < 0 || w >= n_wires)
            throw CircuitError(name + " wire " + std::to_string(w) + " outside register of " +
                               std::to_string(n_wires));
        for (std::size_t j = 0; j < i; ++j)
            if (gate.wires[j] == w) throw CircuitError(name + " repeats wire " + std::to_string(w));
    }
    if (gate.kind == GateKind::PhaseOracle) {
        if (gate.oracle_state.size() != gate.wires.size())
            throw CircuitError("PhaseOracle marked state has " + std::to_string(gate.oracle_state.size()) +
                               " bits for " + std::to_string(gate.wires.size()) + " wires");
        for (int b : gate.oracle_state)
            if (b != 0 && b != 1) throw CircuitError("PhaseOracle marked state must be a bit string");
    }
    if ((gate.param_slot || gate.input_slot) && !single_wire(gate.kind))
        throw CircuitError(name + " cannot carry a parameter slot");
    if (gate.param_slot && gate.input_slot) throw CircuitError("gate cannot read both a parameter and an input");
    if ((gate.param_slot && *gate.param_slot < 0) || (gate.input_slot && *gate.input_slot < 0))
        throw CircuitError("negative slot index");
}

namespace {

// Gates stored in a CircuitTemplate were validated on insertion.
void apply_unchecked(Statevector& state, const Gate& gate) {
    const int w = gate.wires.front();
    const double c = std::cos(gate.angle / 2.0);
    const double s = std::sin(gate.angle / 2.0);
    switch (gate.kind) {
        case GateKind::RX:
            apply_single(state, w, Mat2{c, -kI * s, -kI * s, c});
            break;
        case GateKind::RY:
            apply_single(state, w, Mat2{c, -s, s, c});
            break;
        case GateKind::RZ:
            apply_diag(state, w, Complex{c, -s}, Complex{c, s});
            break;
        case GateKind::Phase:
            apply_diag(state, w, 1.0, std::polar(1.0, gate.angle));
            break;
        case GateKind::X:
            apply_single(state, w, Mat2{0.0, 1.0, 1.0, 0.0});
            break;
        case GateKind::Z:
            apply_diag(state, w, 1.0, -1.0);
            break;
        case GateKind::H:
            apply_single(state, w, kHadamard);
            break;
        case GateKind::CNOT:
        case GateKind::MCX:
            apply_multi_controlled_x(state, gate.wires);
            break;
        case GateKind::QFT:
            apply_qft(state, gate.wires);
            break;
        case GateKind::InverseQFT:
            apply_inverse_qft(state, gate.wires);
            break;
        case GateKind::PhaseOracle:
            apply_phase_oracle(state, gate.wires, gate.oracle_state);
            break;
    }
}

}  // namespace

void apply_gate(Statevector& state, const Gate& gate) {
    validate(gate, state.n_wires());
    apply_unchecked(state, gate);
}

// ---------------------------------------------------------------------------

CircuitTemplate::CircuitTemplate(int n_wires) : n_wires_(n_wires) {
    if (n_wires < 1 || n_wires > kMaxWires)
        throw ConfigError("register size " + std::to_string(n_wires) + " outside [1, " +
                          std::to_string(kMaxWires) + "]");
}

void CircuitTemplate::add(Gate gate) {
    validate(gate, n_wires_);
    if (gate.param_slot) n_params_ = std::max(n_params_, *gate.param_slot + 1);
    if (gate.input_slot) n_inputs_ = std::max(n_inputs_, *gate.input_slot + 1);
    gates_.push_back(std::move(gate));
}

void CircuitTemplate::insert(std::size_t pos, std::span<const Gate> block) {
    if (pos > gates_.size()) throw CircuitError("insertion point past the end of the circuit");
    for (const auto& g : block) {
        validate(g, n_wires_);
        if (g.param_slot) n_params_ = std::max(n_params_, *g.param_slot + 1);
        if (g.input_slot) n_inputs_ = std::max(n_inputs_, *g.input_slot + 1);
    }
    const std::size_t old_size = gates_.size();
    gates_.insert(gates_.begin() + static_cast<std::ptrdiff_t>(pos), block.begin(), block.end());
    // Appending never moves an anchor; any other splice pushes anchors at or after pos.
    if (pos < old_size) {
        if (encoding_end_ >= pos) encoding_end_ += block.size();
        if (final_block_begin_ >= pos) final_block_begin_ += block.size();
    }
}

Gate resolve(const Gate& gate, std::span<const double> params, std::span<const double> inputs) {
    if (!gate.param_slot && !gate.input_slot) return gate;
    Gate g = gate;
    if (gate.param_slot) {
        const auto k = static_cast<std::size_t>(*gate.param_slot);
        if (k >= params.size())
            throw CircuitError("missing trainable parameter for slot " + std::to_string(k));
        g.angle = params[k];
    } else {
        const auto k = static_cast<std::size_t>(*gate.input_slot);
        if (k >= inputs.size()) throw CircuitError("missing input angle for slot " + std::to_string(k));
        g.angle = inputs[k];
    }
    return g;
}

namespace {

void check_coverage(const CircuitTemplate& circuit, std::span<const double> params,
                    std::span<const double> inputs) {
    if (params.size() < static_cast<std::size_t>(circuit.n_params()))
        throw CircuitError("circuit has " + std::to_string(circuit.n_params()) + " trainable slots but " +
                           std::to_string(params.size()) + " parameters were given");
    if (inputs.size() < static_cast<std::size_t>(circuit.n_inputs()))
        throw CircuitError("circuit has " + std::to_string(circuit.n_inputs()) + " encoder slots but " +
                           std::to_string(inputs.size()) + " angles were given");
}

// Resolved gate list; angles substituted once per evaluation.
std::vector<Gate> resolve_all(const CircuitTemplate& circuit, std::span<const double> params,
                              std::span<const double> inputs) {
    check_coverage(circuit, params, inputs);
    std::vector<Gate> out;
    out.reserve(circuit.gates().size());
    for (const auto& g : circuit.gates()) out.push_back(resolve(g, params, inputs));
    return out;
}

}  // namespace

Statevector apply_circuit(Statevector state, const CircuitTemplate& circuit, std::span<const double> params,
                          std::span<const double> inputs) {
    if (state.n_wires() != circuit.n_wires())
        throw CircuitError("state has " + std::to_string(state.n_wires()) + " wires, circuit expects " +
                           std::to_string(circuit.n_wires()));
    for (const auto& g : resolve_all(circuit, params, inputs)) apply_unchecked(state, g);
    return state;
}

// ---------------------------------------------------------------------------

double expectation(const Statevector& state, const Observable& obs) {
    std::size_t m = 0;
    for (int w : obs.z_wires) {
        if (w < 0 || w >= state.n_wires()) throw CircuitError("observable wire " + std::to_string(w) + " out of range");
        m ^= state.mask(w);
    }
    double e = 0.0;
    const auto amps = state.amps();
    for (std::size_t i = 0; i < amps.size(); ++i) {
        const double p = std::norm(amps[i]);
        e += (std::popcount(i & m) & 1) ? -p : p;
    }
    return std::clamp(e, -1.0, 1.0);
}

std::vector<double> z_expectations(const Statevector& state, std::span<const int> wires) {
    std::vector<std::size_t> masks;
    masks.reserve(wires.size());
    for (int w : wires) {
        if (w < 0 || w >= state.n_wires()) throw CircuitError("observable wire " + std::to_string(w) + " out of range");
        masks.push_back(state.mask(w));
    }
    std::vector<double> out(wires.size(), 0.0);
    const auto amps = state.amps();
    for (std::size_t i = 0; i < amps.size(); ++i) {
        const double p = std::norm(amps[i]);
        for (std::size_t k = 0; k < masks.size(); ++k) out[k] += (i & masks[k]) ? -p : p;
    }
    for (auto& v : out) v = std::clamp(v, -1.0, 1.0);
    return out;
}

namespace {

// Shared driver for the shift rule: for each slotted rotation k (in circuit
// order) evaluates the features with the gate angle shifted by +-pi/2 and
// hands back (slot-kind, slot, derivative row contribution).
// Returns the unshifted final state.
template <typename Measure, typename Accumulate>
Statevector shift_rule(const CircuitTemplate& circuit, std::span<const double> params, std::span<const double> inputs,
                bool want_inputs, Measure&& measure, Accumulate&& accumulate) {
    const auto resolved = resolve_all(circuit, params, inputs);
    const auto& raw = circuit.gates();
    Statevector prefix(circuit.n_wires());
    for (std::size_t k = 0; k < resolved.size(); ++k) {
        const Gate& g = raw[k];
        const bool trainable = g.param_slot.has_value();
        const bool encoder = want_inputs && g.input_slot.has_value();
        if (trainable || encoder) {
            if (!is_pauli_rotation(g.kind))
                throw UnsupportedTemplateError(std::string("trainable ") + std::string(to_string(g.kind)) +
                                               " gate is not a Pauli rotation");
            std::vector<double> plus;
            std::vector<double> minus;
            for (int sign : {+1, -1}) {
                Statevector s = prefix;
                Gate shifted = resolved[k];
                shifted.angle += sign * std::numbers::pi / 2.0;
                apply_unchecked(s, shifted);
                for (std::size_t j = k + 1; j < resolved.size(); ++j) apply_unchecked(s, resolved[j]);
                (sign > 0 ? plus : minus) = measure(s);
            }
            std::vector<double> diff(plus.size());
            for (std::size_t i = 0; i < plus.size(); ++i) diff[i] = 0.5 * (plus[i] - minus[i]);
            accumulate(trainable, trainable ? *g.param_slot : *g.input_slot, diff);
        }
        apply_unchecked(prefix, resolved[k]);
    }
    return prefix;
}

}  // namespace

Eigen::MatrixXd parameter_shift_jacobian(const CircuitTemplate& circuit, std::span<const double> params,
                                         std::span<const double> inputs, std::span<const Observable> observables) {
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(observables.size()),
                                                static_cast<Eigen::Index>(params.size()));
    auto measure = [&](const Statevector& s) {
        std::vector<double> v;
        v.reserve(observables.size());
        for (const auto& o : observables) v.push_back(expectation(s, o));
        return v;
    };
    shift_rule(circuit, params, inputs, false, measure, [&](bool, int slot, const std::vector<double>& d) {
        for (std::size_t j = 0; j < d.size(); ++j) jac(static_cast<Eigen::Index>(j), slot) += d[j];
    });
    return jac;
}

FeatureJacobians z_features_with_jacobians(const CircuitTemplate& circuit, std::span<const double> params,
                                           std::span<const double> inputs, std::span<const int> wires,
                                           const ShotSampler* sampler) {
    FeatureJacobians out;
    const auto rows = static_cast<Eigen::Index>(wires.size());
    out.d_params = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(params.size()));
    out.d_inputs = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(inputs.size()));
    auto measure = [&](const Statevector& s) {
        if (sampler && sampler->shots > 0) return sampled_z_expectations(s, wires, sampler->shots, *sampler->rng);
        return z_expectations(s, wires);
    };
    const Statevector final_state =
        shift_rule(circuit, params, inputs, true, measure, [&](bool trainable, int slot, const std::vector<double>& d) {
            auto& target = trainable ? out.d_params : out.d_inputs;
            for (std::size_t j = 0; j < d.size(); ++j) target(static_cast<Eigen::Index>(j), slot) += d[j];
        });
    out.features = measure(final_state);
    return out;
}

// ---------------------------------------------------------------------------

std::map<std::string, long> sample_bitstrings(const Statevector& state, long shots, Rng& rng) {
    if (shots < 1) throw ConfigError("shots must be >= 1");
    std::vector<double> probs(state.dim());
    for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = std::norm(state[i]);
    std::discrete_distribution<std::size_t> dist(probs.begin(), probs.end());
    std::vector<long> counts(state.dim(), 0);
    for (long s = 0; s < shots; ++s) ++counts[dist(rng)];
    std::map<std::string, long> out;
    const int n = state.n_wires();
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] == 0) continue;
        std::string key(static_cast<std::size_t>(n), '0');
        for (int w = 0; w < n; ++w)
            if (i & state.mask(w)) key[static_cast<std::size_t>(w)] = '1';
        out.emplace(std::move(key), counts[i]);
    }
    return out;
}

std::vector<double> sampled_z_expectations(const Statevector& state, std::span<const int> wires, long shots,
                                           Rng& rng) {
    const auto counts = sample_bitstrings(state, shots, rng);
    std::vector<double> out(wires.size(), 0.0);
    for (const auto& [bits, c] : counts)
        for (std::size_t k = 0; k < wires.size(); ++k)
            out[k] += (bits[static_cast<std::size_t>(wires[k])] == '1' ? -1.0 : 1.0) * static_cast<double>(c);
    for (auto& v : out) v /= static_cast<double>(shots);
    return out;
}

}  // namespace qfl::qsim
