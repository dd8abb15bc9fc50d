#pragma once

// Hybrid classifier: affine encoder -> angle-encoded PQC -> affine head.
//
//   angles   = pi * tanh(W_enc x + c_enc)                 (one per data wire)
//   features = <Z_j> of the PQC on the data wires
//   logits   = W_head features + b_head

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "qfl/batch.hpp"
#include "qfl/qsim.hpp"
#include "qfl/rng.hpp"

namespace qfl::model {

struct ModelArchitecture {
    int n_data_wires = 4;
    int n_ancilla = 1;
    int entangling_depth = 6;
    int n_classes = 10;
    int input_dim = 64;

    /// 4 data + 1 ancilla, depth 6, ten classes. input_dim 64 (8x8) or 784.
    static ModelArchitecture mnist(int input_dim = 64);
    /// 8 data + 1 ancilla, ten classes, 32x32x3 inputs.
    static ModelArchitecture cifar(int entangling_depth = 2);

    int n_wires() const noexcept { return n_data_wires + n_ancilla; }
    int ancilla_wire() const noexcept { return n_data_wires; }
    int n_quantum_params() const noexcept { return 2 * n_data_wires * entangling_depth; }
    std::vector<int> data_wires() const;

    /// Throws ConfigError on non-positive sizes or more than 16 wires.
    void validate() const;

    bool operator==(const ModelArchitecture&) const = default;
};

/// Offsets of the three parameter blocks inside the flat vector.
///
///   encoder: W_enc (n_data x input_dim, row-major) then c_enc (n_data)
///   quantum: 2 * n_data * depth rotation angles, in circuit order
///   head:    W_head (n_classes x n_data, row-major) then b_head (n_classes)
struct ParamManifest {
    struct Block {
        std::size_t offset = 0;
        std::size_t size = 0;
    };

    ModelArchitecture arch;
    Block encoder;
    Block quantum;
    Block head;

    static ParamManifest for_architecture(const ModelArchitecture& arch);
    std::size_t dim() const noexcept { return encoder.size + quantum.size + head.size; }
};

struct ModelParams {
    ParamManifest manifest;
    std::vector<double> flat;

    std::span<const double> encoder_weights() const;
    std::span<const double> encoder_bias() const;
    std::span<const double> quantum() const;
    std::span<const double> head_weights() const;
    std::span<const double> head_bias() const;

    const ModelArchitecture& arch() const noexcept { return manifest.arch; }
    std::size_t dim() const noexcept { return flat.size(); }
};

/// Blocks as separate vectors. flatten(unflatten(p)) reproduces p.flat.
struct UnflattenedParams {
    std::vector<double> encoder_weights;
    std::vector<double> encoder_bias;
    std::vector<double> quantum;
    std::vector<double> head_weights;
    std::vector<double> head_bias;
};

UnflattenedParams unflatten(const ModelParams& params);
ModelParams flatten(const UnflattenedParams& blocks, const ParamManifest& manifest);

/// All-zero parameters.
ModelParams zero_params(const ModelArchitecture& arch);

struct InitScales {
    double encoder = 1.0;  // W_enc ~ N(0, (encoder / sqrt(input_dim))^2)
    double quantum = 0.5;  // rotations ~ U(-quantum, quantum)
    double head = 1.0;     // W_head ~ N(0, (head / sqrt(n_data))^2)
};

ModelParams init_params(const ModelArchitecture& arch, Rng& rng, const InitScales& scales = {});

/// Clean template: RX angle encoding on each data wire, then `depth` blocks of
/// [trainable RX, trainable RY per data wire; CNOT ring over data wires].
/// The ancilla stays idle. The final block is marked for attack insertion.
qsim::CircuitTemplate clean_template(const ModelArchitecture& arch);

/// pi * tanh(W_enc x + c_enc). Throws ShapeError on an input of the wrong width.
std::vector<double> encode(std::span<const double> input, const ModelParams& params);

struct ForwardResult {
    std::vector<double> logits;
    std::vector<double> features;
};

ForwardResult forward(std::span<const double> input, const ModelParams& params,
                      const qsim::CircuitTemplate& circuit, const qsim::ShotSampler* sampler = nullptr);

/// Cross-entropy with log-sum-exp, multiplied by `scale`. Throws DataError
/// for a label out of range.
double loss(std::span<const double> logits, int label, double scale = 1.0);

struct GradientResult {
    std::vector<double> gradient;  // d(scale * mean loss)/d(flat)
    double mean_loss = 0.0;        // unscaled
};

/// Gradient of loss_scale * (mean batch loss). Head and encoder by the chain
/// rule, quantum block and encoder angles by the parameter-shift rule.
GradientResult backward(const Batch& batch, const ModelParams& params, const qsim::CircuitTemplate& circuit,
                        double loss_scale, const qsim::ShotSampler* sampler = nullptr);

struct AdamWHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

/// Decoupled weight decay Adam.
class AdamW {
public:
    AdamW(std::size_t dim, AdamWHyper hyper);

    /// One update in place. Throws NumericFault (params untouched) when the
    /// gradient has a non-finite entry, ShapeError on a dimension mismatch.
    void step(std::vector<double>& params, std::span<const double> gradient);

    long steps() const noexcept { return t_; }
    const std::vector<double>& first_moment() const noexcept { return m_; }
    const std::vector<double>& second_moment() const noexcept { return v_; }

private:
    AdamWHyper hyper_;
    std::vector<double> m_;
    std::vector<double> v_;
    long t_ = 0;
};

struct LocalTrainConfig {
    int epochs = 1;
    int batch_size = 32;
    AdamWHyper optimizer;
    long shots = 0;  // 0 = exact expectations
};

struct LocalTrainResult {
    std::vector<double> delta;  // theta_after - theta_before
    double initial_loss = 0.0;  // mean loss of the first minibatch pass
    double final_loss = 0.0;    // mean loss over the last epoch
    long steps = 0;
};

/// Local epochs of minibatch AdamW on `data` starting from `params`, which is
/// not modified. Row order is reshuffled each epoch from `rng`. Throws
/// NumericFault when a gradient turns non-finite.
LocalTrainResult local_train(const ModelParams& params, const Batch& data, const qsim::CircuitTemplate& circuit,
                             double loss_scale, const LocalTrainConfig& cfg, Rng& rng);

struct Evaluation {
    double accuracy = 0.0;  // percent
    double mean_loss = 0.0;
};

Evaluation evaluate(const ModelParams& params, const qsim::CircuitTemplate& circuit, const Batch& data);

/// Predicted class (lowest index wins ties).
int argmax(std::span<const double> logits);

}  // namespace qfl::model
