#pragma once

// In-training circuit attacks: a round-level Bernoulli switch decides whether
// a malicious client trains with the clean circuit or with an attack circuit,
// and scales its loss on poisoned rounds.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "qfl/hybrid_model.hpp"
#include "qfl/qsim.hpp"

namespace qfl::attacks {

enum class AttackKind { None, Grover, Pauli, BitFlip, SignFlip };

enum class InsertionPoint { PreEncoding, BeforeFinalBlock, PostCircuit };

/// Grover oracle realization: a direct diagonal gate, or the MCX + ancilla
/// phase-kickback construction.
enum class OracleImpl { Direct, Ancilla };

std::string_view to_string(AttackKind kind);
std::string_view to_string(InsertionPoint point);
std::string_view to_string(OracleImpl impl);
AttackKind parse_attack_kind(std::string_view text);
InsertionPoint parse_insertion_point(std::string_view text);
OracleImpl parse_oracle_impl(std::string_view text);

struct AttackConfig {
    AttackKind kind = AttackKind::None;
    std::vector<int> omega;        // marked bit string over the data wires
    std::vector<int> wires;        // Pauli rotation set J
    std::vector<double> alphas;    // e^{-i alpha X} angles, one per wire in J
    int period = 3;                // BitFlip: active when round % period == 0
    int target_qubit = 0;          // BitFlip wire r
    int sign_qubit = 0;            // SignFlip wire s
    double phase = 3.14159265358979323846;  // SignFlip phi
    double poison_prob = 0.9;      // rho
    double loss_scale = 2.0;       // lambda
    InsertionPoint insertion = InsertionPoint::BeforeFinalBlock;
    OracleImpl oracle = OracleImpl::Ancilla;

    /// Defaults for an architecture: omega all ones, J all data wires with
    /// alpha = pi/4, r = s = 0, and the insertion point that suits `kind`
    /// (post_circuit for BitFlip, before_final_block otherwise).
    static AttackConfig defaults(AttackKind kind, const model::ModelArchitecture& arch);

    /// Throws ConfigError when a field is inconsistent with the architecture.
    void validate(const model::ModelArchitecture& arch) const;
};

/// Gate block the attack splices into the circuit for round `round`
/// (empty when the attack is inactive that round).
std::vector<qsim::Gate> attack_block(const AttackConfig& cfg, const model::ModelArchitecture& arch, long round);

/// Clean template with the attack block spliced at cfg.insertion. Returns the
/// clean template unchanged for AttackKind::None or an inactive BitFlip round.
qsim::CircuitTemplate build_attack_circuit(const qsim::CircuitTemplate& clean, const AttackConfig& cfg,
                                           const model::ModelArchitecture& arch, long round);

/// Phase oracle I - 2|omega><omega| on the data wires via an MCX onto an
/// ancilla prepared in |->: X on the zero bits of omega, X then H on the
/// ancilla, MCX(data -> ancilla), then the mirror image. The ancilla must
/// start in |0> and is returned to |0>.
std::vector<qsim::Gate> grover_oracle_via_ancilla(std::span<const int> omega, std::span<const int> data_wires,
                                                  int ancilla);

/// Direct diagonal form of the same oracle.
qsim::Gate grover_oracle_direct(std::span<const int> omega, std::span<const int> data_wires);

/// Round-level poisoning switch. Each (client, round) draw is a pure function
/// of (seed, client, round), so schedules are reproducible and independent of
/// evaluation order.
class PoisonSchedule {
public:
    PoisonSchedule(std::uint64_t seed, double rho);

    /// b_a^t in {0, 1}.
    int draw(std::uint64_t client, long round) const;
    double rho() const noexcept { return rho_; }

private:
    std::uint64_t seed_;
    double rho_;
};

int gate_poison_round(const PoisonSchedule& schedule, std::uint64_t client, long round);

/// 1 on clean rounds, lambda on poisoned rounds. Throws ConfigError for lambda < 1.
double effective_loss_scale(int poisoned, double lambda);

}  // namespace qfl::attacks
