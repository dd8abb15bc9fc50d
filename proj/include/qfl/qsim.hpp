#pragma once

// Dense statevector simulation of parameterized circuits.
//
// Basis ordering: wire 0 is the most significant bit of the basis index, so
// on a 3-wire register the amplitude of |q0 q1 q2> = |1 0 0> sits at index 4.

#include <complex>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "qfl/rng.hpp"

namespace qfl::qsim {

using Complex = std::complex<double>;

inline constexpr int kMaxWires = 16;

class Statevector {
public:
    /// |0...0> on n_wires wires; throws ConfigError outside [1, kMaxWires].
    explicit Statevector(int n_wires);

    /// Takes ownership of raw amplitudes. Length must be 2^n_wires; the vector
    /// is normalized on entry (throws ConfigError on a zero vector).
    static Statevector from_amplitudes(int n_wires, std::vector<Complex> amps);

    int n_wires() const noexcept { return n_wires_; }
    std::size_t dim() const noexcept { return amps_.size(); }

    std::span<const Complex> amps() const noexcept { return amps_; }
    std::span<Complex> amps() noexcept { return amps_; }
    const Complex& operator[](std::size_t i) const { return amps_[i]; }

    double norm_squared() const noexcept;

    /// Bit mask of a wire inside a basis index.
    std::size_t mask(int wire) const noexcept {
        return std::size_t{1} << (n_wires_ - 1 - wire);
    }

private:
    int n_wires_;
    std::vector<Complex> amps_;
};

Statevector new_state(int n_wires);

enum class GateKind {
    RX,
    RY,
    RZ,
    Phase,
    X,
    Z,
    H,
    CNOT,
    MCX,
    QFT,
    InverseQFT,
    PhaseOracle,
};

std::string_view to_string(GateKind kind);

/// RX / RY / RZ: the kinds the parameter-shift rule differentiates.
constexpr bool is_pauli_rotation(GateKind kind) noexcept {
    return kind == GateKind::RX || kind == GateKind::RY || kind == GateKind::RZ;
}

/// Gates whose matrix is diagonal in the computational basis.
constexpr bool is_diagonal(GateKind kind) noexcept {
    return kind == GateKind::RZ || kind == GateKind::Phase || kind == GateKind::Z ||
           kind == GateKind::PhaseOracle;
}

/// One gate of a circuit.
///
/// Rotations use the half-angle convention R_P(t) = exp(-i t P / 2). The angle
/// is either the constant `angle`, or is read from the trainable block
/// (`param_slot`) or the encoder output (`input_slot`) when the circuit is run.
/// For CNOT and MCX the last wire is the target.
struct Gate {
    GateKind kind = GateKind::X;
    std::vector<int> wires;
    double angle = 0.0;
    std::optional<int> param_slot;
    std::optional<int> input_slot;
    std::vector<int> oracle_state;  // PhaseOracle only: one bit per wire

    static Gate rx(int wire, double angle) { return {GateKind::RX, {wire}, angle, {}, {}, {}}; }
    static Gate ry(int wire, double angle) { return {GateKind::RY, {wire}, angle, {}, {}, {}}; }
    static Gate rz(int wire, double angle) { return {GateKind::RZ, {wire}, angle, {}, {}, {}}; }
    static Gate phase(int wire, double phi) { return {GateKind::Phase, {wire}, phi, {}, {}, {}}; }
    static Gate x(int wire) { return {GateKind::X, {wire}, 0.0, {}, {}, {}}; }
    static Gate z(int wire) { return {GateKind::Z, {wire}, 0.0, {}, {}, {}}; }
    static Gate h(int wire) { return {GateKind::H, {wire}, 0.0, {}, {}, {}}; }
    static Gate cnot(int control, int target) {
        return {GateKind::CNOT, {control, target}, 0.0, {}, {}, {}};
    }
    static Gate mcx(std::vector<int> controls, int target);
    static Gate qft(std::vector<int> wires) { return {GateKind::QFT, std::move(wires), 0.0, {}, {}, {}}; }
    static Gate inverse_qft(std::vector<int> wires) {
        return {GateKind::InverseQFT, std::move(wires), 0.0, {}, {}, {}};
    }
    static Gate phase_oracle(std::vector<int> wires, std::vector<int> marked) {
        return {GateKind::PhaseOracle, std::move(wires), 0.0, {}, {}, std::move(marked)};
    }
    static Gate trainable(GateKind kind, int wire, int slot);
    static Gate encoder(GateKind kind, int wire, int slot);
};

/// Checks arity, wire range and distinctness against a register size.
/// Throws CircuitError.
void validate(const Gate& gate, int n_wires);

/// Applies a gate with its constant angle (slots are ignored here; see
/// apply_circuit for slot resolution).
void apply_gate(Statevector& state, const Gate& gate);

/// Ordered gate program with trainable and encoder slots plus two anchors used
/// to splice attack blocks: the end of the encoding layer and the start of the
/// final trainable block.
class CircuitTemplate {
public:
    explicit CircuitTemplate(int n_wires);

    int n_wires() const noexcept { return n_wires_; }
    const std::vector<Gate>& gates() const noexcept { return gates_; }
    bool empty() const noexcept { return gates_.empty(); }

    /// Number of trainable slots referenced (max slot + 1).
    int n_params() const noexcept { return n_params_; }
    /// Number of encoder slots referenced (max slot + 1).
    int n_inputs() const noexcept { return n_inputs_; }

    void add(Gate gate);
    /// Splices gates before position `pos`. Anchors at or after `pos` move.
    void insert(std::size_t pos, std::span<const Gate> block);

    std::size_t encoding_end() const noexcept { return encoding_end_; }
    std::size_t final_block_begin() const noexcept { return final_block_begin_; }
    void mark_encoding_end() noexcept { encoding_end_ = gates_.size(); }
    void mark_final_block_begin() noexcept { final_block_begin_ = gates_.size(); }

private:
    int n_wires_;
    std::vector<Gate> gates_;
    int n_params_ = 0;
    int n_inputs_ = 0;
    std::size_t encoding_end_ = 0;
    std::size_t final_block_begin_ = 0;
};

/// Gate with its angle taken from params/inputs when it has a slot.
Gate resolve(const Gate& gate, std::span<const double> params, std::span<const double> inputs);

/// Runs the circuit on `state`. Throws CircuitError when params/inputs do not
/// cover the template's slots or the register sizes differ.
Statevector apply_circuit(Statevector state, const CircuitTemplate& circuit,
                          std::span<const double> params, std::span<const double> inputs);

/// Tensor product of Pauli-Z factors on the listed wires.
struct Observable {
    std::vector<int> z_wires;

    static Observable z(int wire) { return Observable{{wire}}; }
};

double expectation(const Statevector& state, const Observable& obs);

/// <Z_w> for every listed wire in one pass over the amplitudes.
std::vector<double> z_expectations(const Statevector& state, std::span<const int> wires);

/// d<M_j>/d(theta_k) by the two-term shift rule, one row per observable and
/// one column per trainable slot. A slot used by several gates sums the
/// contributions. Throws UnsupportedTemplateError for a trainable gate that
/// is not RX/RY/RZ.
Eigen::MatrixXd parameter_shift_jacobian(const CircuitTemplate& circuit,
                                         std::span<const double> params,
                                         std::span<const double> inputs,
                                         std::span<const Observable> observables);

/// Opt-in shot-noise measurement: expectations are estimated from `shots`
/// samples drawn from `rng` instead of computed exactly.
struct ShotSampler {
    long shots = 0;
    Rng* rng = nullptr;
};

/// Single-wire Z features together with their shift-rule Jacobians with
/// respect to the trainable block and the encoder angles. This is the hot
/// path of model training: every shifted circuit reuses the cached prefix
/// state and yields all features at once.
struct FeatureJacobians {
    std::vector<double> features;
    Eigen::MatrixXd d_params;  // |wires| x n_params
    Eigen::MatrixXd d_inputs;  // |wires| x n_inputs
};

FeatureJacobians z_features_with_jacobians(const CircuitTemplate& circuit,
                                           std::span<const double> params,
                                           std::span<const double> inputs,
                                           std::span<const int> wires,
                                           const ShotSampler* sampler = nullptr);

/// Draws `shots` computational-basis outcomes. Keys are bit strings with
/// wire 0 first.
std::map<std::string, long> sample_bitstrings(const Statevector& state, long shots, Rng& rng);

/// Shot-noise estimate of <Z_w> per wire from `shots` samples.
std::vector<double> sampled_z_expectations(const Statevector& state, std::span<const int> wires,
                                           long shots, Rng& rng);

}  // namespace qfl::qsim
