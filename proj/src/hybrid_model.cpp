#include "qfl/hybrid_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "qfl/errors.hpp"

namespace qfl::model {

using qsim::CircuitTemplate;
using qsim::Gate;
using qsim::GateKind;

ModelArchitecture ModelArchitecture::mnist(int input_dim) {
    return ModelArchitecture{4, 1, 6, 10, input_dim};
}

ModelArchitecture ModelArchitecture::cifar(int entangling_depth) {
    return ModelArchitecture{8, 1, entangling_depth, 10, 3072};
}

std::vector<int> ModelArchitecture::data_wires() const {
    std::vector<int> w(static_cast<std::size_t>(n_data_wires));
    std::iota(w.begin(), w.end(), 0);
    return w;
}

void ModelArchitecture::validate() const {
    if (n_data_wires < 1 || n_ancilla < 0 || entangling_depth < 1 || n_classes < 2 || input_dim < 1)
        throw ConfigError("architecture sizes must be positive (at least two classes)");
    if (n_wires() > qsim::kMaxWires)
        throw ConfigError("architecture needs " + std::to_string(n_wires()) + " wires, simulator limit is " +
                          std::to_string(qsim::kMaxWires));
}

ParamManifest ParamManifest::for_architecture(const ModelArchitecture& arch) {
    arch.validate();
    ParamManifest m;
    m.arch = arch;
    const auto nd = static_cast<std::size_t>(arch.n_data_wires);
    m.encoder = {0, nd * static_cast<std::size_t>(arch.input_dim) + nd};
    m.quantum = {m.encoder.offset + m.encoder.size, static_cast<std::size_t>(arch.n_quantum_params())};
    m.head = {m.quantum.offset + m.quantum.size, static_cast<std::size_t>(arch.n_classes) * nd +
                                                     static_cast<std::size_t>(arch.n_classes)};
    return m;
}

namespace {

std::size_t enc_w_size(const ParamManifest& m) {
    return static_cast<std::size_t>(m.arch.n_data_wires) * static_cast<std::size_t>(m.arch.input_dim);
}
std::size_t head_w_size(const ParamManifest& m) {
    return static_cast<std::size_t>(m.arch.n_classes) * static_cast<std::size_t>(m.arch.n_data_wires);
}

}  // namespace

std::span<const double> ModelParams::encoder_weights() const {
    return std::span<const double>(flat).subspan(manifest.encoder.offset, enc_w_size(manifest));
}
std::span<const double> ModelParams::encoder_bias() const {
    return std::span<const double>(flat).subspan(manifest.encoder.offset + enc_w_size(manifest),
                                                 static_cast<std::size_t>(manifest.arch.n_data_wires));
}
std::span<const double> ModelParams::quantum() const {
    return std::span<const double>(flat).subspan(manifest.quantum.offset, manifest.quantum.size);
}
std::span<const double> ModelParams::head_weights() const {
    return std::span<const double>(flat).subspan(manifest.head.offset, head_w_size(manifest));
}
std::span<const double> ModelParams::head_bias() const {
    return std::span<const double>(flat).subspan(manifest.head.offset + head_w_size(manifest),
                                                 static_cast<std::size_t>(manifest.arch.n_classes));
}

UnflattenedParams unflatten(const ModelParams& p) {
    if (p.flat.size() != p.manifest.dim())
        throw ShapeError("parameter vector has " + std::to_string(p.flat.size()) + " entries, manifest expects " +
                         std::to_string(p.manifest.dim()));
    auto vec = [](std::span<const double> s) { return std::vector<double>(s.begin(), s.end()); };
    return {vec(p.encoder_weights()), vec(p.encoder_bias()), vec(p.quantum()), vec(p.head_weights()),
            vec(p.head_bias())};
}

ModelParams flatten(const UnflattenedParams& b, const ParamManifest& manifest) {
    const auto nd = static_cast<std::size_t>(manifest.arch.n_data_wires);
    if (b.encoder_weights.size() != enc_w_size(manifest) || b.encoder_bias.size() != nd ||
        b.quantum.size() != manifest.quantum.size || b.head_weights.size() != head_w_size(manifest) ||
        b.head_bias.size() != static_cast<std::size_t>(manifest.arch.n_classes))
        throw ShapeError("parameter blocks do not match the manifest");
    ModelParams p{manifest, {}};
    p.flat.reserve(manifest.dim());
    for (const auto* v : {&b.encoder_weights, &b.encoder_bias, &b.quantum, &b.head_weights, &b.head_bias})
        p.flat.insert(p.flat.end(), v->begin(), v->end());
    return p;
}

ModelParams zero_params(const ModelArchitecture& arch) {
    auto manifest = ParamManifest::for_architecture(arch);
    const auto d = manifest.dim();
    return ModelParams{std::move(manifest), std::vector<double>(d, 0.0)};
}

ModelParams init_params(const ModelArchitecture& arch, Rng& rng, const InitScales& scales) {
    ModelParams p = zero_params(arch);
    const auto& m = p.manifest;
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    const double enc_sd = scales.encoder / std::sqrt(static_cast<double>(arch.input_dim));
    for (std::size_t i = 0; i < enc_w_size(m); ++i) p.flat[m.encoder.offset + i] = enc_sd * normal(rng);
    for (std::size_t i = 0; i < m.quantum.size; ++i) p.flat[m.quantum.offset + i] = scales.quantum * uniform(rng);
    const double head_sd = scales.head / std::sqrt(static_cast<double>(arch.n_data_wires));
    for (std::size_t i = 0; i < head_w_size(m); ++i) p.flat[m.head.offset + i] = head_sd * normal(rng);
    return p;
}

CircuitTemplate clean_template(const ModelArchitecture& arch) {
    arch.validate();
    CircuitTemplate c(arch.n_wires());
    const int nd = arch.n_data_wires;
    for (int j = 0; j < nd; ++j) c.add(Gate::encoder(GateKind::RX, j, j));
    c.mark_encoding_end();
    int slot = 0;
    for (int layer = 0; layer < arch.entangling_depth; ++layer) {
        if (layer == arch.entangling_depth - 1) c.mark_final_block_begin();
        for (int j = 0; j < nd; ++j) {
            c.add(Gate::trainable(GateKind::RX, j, slot++));
            c.add(Gate::trainable(GateKind::RY, j, slot++));
        }
        if (nd == 2) {
            c.add(Gate::cnot(0, 1));
        } else if (nd > 2) {
            for (int j = 0; j < nd; ++j) c.add(Gate::cnot(j, (j + 1) % nd));
        }
    }
    return c;
}

std::vector<double> encode(std::span<const double> input, const ModelParams& params) {
    const auto& arch = params.arch();
    if (input.size() != static_cast<std::size_t>(arch.input_dim))
        throw ShapeError("input has " + std::to_string(input.size()) + " features, model expects " +
                         std::to_string(arch.input_dim));
    const auto w = params.encoder_weights();
    const auto c = params.encoder_bias();
    std::vector<double> angles(static_cast<std::size_t>(arch.n_data_wires));
    for (std::size_t j = 0; j < angles.size(); ++j) {
        const auto row = w.subspan(j * input.size(), input.size());
        const double pre = std::inner_product(row.begin(), row.end(), input.begin(), c[j]);
        angles[j] = std::numbers::pi * std::tanh(pre);
    }
    return angles;
}

namespace {

std::vector<double> head_logits(const ModelParams& params, std::span<const double> features) {
    const auto& arch = params.arch();
    const auto w = params.head_weights();
    const auto b = params.head_bias();
    const auto nd = static_cast<std::size_t>(arch.n_data_wires);
    std::vector<double> logits(static_cast<std::size_t>(arch.n_classes));
    for (std::size_t c = 0; c < logits.size(); ++c) {
        const auto row = w.subspan(c * nd, nd);
        logits[c] = std::inner_product(row.begin(), row.end(), features.begin(), b[c]);
    }
    return logits;
}

void check_circuit(const ModelParams& params, const CircuitTemplate& circuit) {
    const auto& arch = params.arch();
    if (circuit.n_wires() != arch.n_wires() || circuit.n_params() > arch.n_quantum_params() ||
        circuit.n_inputs() > arch.n_data_wires)
        throw ShapeError("circuit template does not match the model architecture");
}

// Softmax probabilities and the log-sum-exp of logits.
double log_softmax(std::span<const double> logits, std::vector<double>& probs) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    probs.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - mx);
        sum += probs[i];
    }
    for (auto& p : probs) p /= sum;
    return mx + std::log(sum);
}

}  // namespace

ForwardResult forward(std::span<const double> input, const ModelParams& params, const CircuitTemplate& circuit,
                      const qsim::ShotSampler* sampler) {
    check_circuit(params, circuit);
    const auto angles = encode(input, params);
    const auto state = qsim::apply_circuit(qsim::Statevector(circuit.n_wires()), circuit, params.quantum(), angles);
    const auto wires = params.arch().data_wires();
    ForwardResult out;
    out.features = (sampler && sampler->shots > 0)
                       ? qsim::sampled_z_expectations(state, wires, sampler->shots, *sampler->rng)
                       : qsim::z_expectations(state, wires);
    out.logits = head_logits(params, out.features);
    return out;
}

double loss(std::span<const double> logits, int label, double scale) {
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
        throw DataError("label " + std::to_string(label) + " outside [0, " + std::to_string(logits.size()) + ")");
    std::vector<double> probs;
    const double lse = log_softmax(logits, probs);
    return scale * std::max(0.0, lse - logits[static_cast<std::size_t>(label)]);
}

GradientResult backward(const Batch& batch, const ModelParams& params, const CircuitTemplate& circuit,
                        double loss_scale, const qsim::ShotSampler* sampler) {
    if (!(loss_scale > 0.0)) throw ConfigError("loss scale must be positive");
    if (batch.empty()) throw DataError("empty batch");
    check_circuit(params, circuit);
    const auto& arch = params.arch();
    const auto& m = params.manifest;
    const auto nd = static_cast<std::size_t>(arch.n_data_wires);
    const auto nc = static_cast<std::size_t>(arch.n_classes);
    const auto in = static_cast<std::size_t>(arch.input_dim);
    const auto wires = arch.data_wires();
    const auto head_w = params.head_weights();
    const auto enc_w = params.encoder_weights();
    const auto enc_b = params.encoder_bias();

    GradientResult out;
    out.gradient.assign(params.dim(), 0.0);
    auto& g = out.gradient;
    std::vector<double> probs;
    std::vector<double> pre(nd);
    std::vector<double> angles(nd);
    double total_loss = 0.0;

    for (std::size_t s = 0; s < batch.size(); ++s) {
        const auto x = batch.input(s);
        const int y = batch.labels[s];
        if (y < 0 || static_cast<std::size_t>(y) >= nc) throw DataError("label out of range in batch");
        for (std::size_t j = 0; j < nd; ++j) {
            pre[j] = std::inner_product(x.begin(), x.end(), enc_w.begin() + static_cast<std::ptrdiff_t>(j * in),
                                        enc_b[j]);
            angles[j] = std::numbers::pi * std::tanh(pre[j]);
        }
        const auto fj = qsim::z_features_with_jacobians(circuit, params.quantum(), angles, wires, sampler);
        const auto logits = head_logits(params, fj.features);
        const double lse = log_softmax(logits, probs);
        total_loss += lse - logits[static_cast<std::size_t>(y)];

        // dL/dlogits = softmax - onehot
        std::vector<double> dlogits = probs;
        dlogits[static_cast<std::size_t>(y)] -= 1.0;

        std::vector<double> dfeat(nd, 0.0);
        for (std::size_t c = 0; c < nc; ++c) {
            g[m.head.offset + nc * nd + c] += dlogits[c];
            for (std::size_t j = 0; j < nd; ++j) {
                g[m.head.offset + c * nd + j] += dlogits[c] * fj.features[j];
                dfeat[j] += head_w[c * nd + j] * dlogits[c];
            }
        }
        for (std::size_t k = 0; k < m.quantum.size; ++k) {
            double acc = 0.0;
            for (std::size_t j = 0; j < nd; ++j)
                acc += dfeat[j] * fj.d_params(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
            g[m.quantum.offset + k] += acc;
        }
        for (std::size_t a = 0; a < nd; ++a) {
            double dangle = 0.0;
            for (std::size_t j = 0; j < nd; ++j)
                dangle += dfeat[j] * fj.d_inputs(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(a));
            const double t = std::tanh(pre[a]);
            const double dpre = dangle * std::numbers::pi * (1.0 - t * t);
            g[m.encoder.offset + nd * in + a] += dpre;
            double* row = g.data() + m.encoder.offset + a * in;
            for (std::size_t i = 0; i < in; ++i) row[i] += dpre * x[i];
        }
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (auto& v : g) v *= inv;
    if (loss_scale != 1.0)
        for (auto& v : g) v *= loss_scale;
    out.mean_loss = total_loss * inv;
    return out;
}

AdamW::AdamW(std::size_t dim, AdamWHyper hyper) : hyper_(hyper), m_(dim, 0.0), v_(dim, 0.0) {
    if (!(hyper.lr >= 0.0) || !(hyper.beta1 >= 0.0 && hyper.beta1 < 1.0) || !(hyper.beta2 >= 0.0 && hyper.beta2 < 1.0) ||
        !(hyper.eps > 0.0) || !(hyper.weight_decay >= 0.0))
        throw ConfigError("invalid AdamW hyperparameters");
}

void AdamW::step(std::vector<double>& params, std::span<const double> gradient) {
    if (params.size() != m_.size() || gradient.size() != m_.size())
        throw ShapeError("optimizer state has dimension " + std::to_string(m_.size()) + ", got params " +
                         std::to_string(params.size()) + " / gradient " + std::to_string(gradient.size()));
    for (std::size_t i = 0; i < gradient.size(); ++i)
        if (!std::isfinite(gradient[i]))
            throw NumericFault("non-finite gradient entry at index " + std::to_string(i));
    ++t_;
    const double bc1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(t_));
    const double decay = 1.0 - hyper_.lr * hyper_.weight_decay;
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i] *= decay;
        m_[i] = hyper_.beta1 * m_[i] + (1.0 - hyper_.beta1) * gradient[i];
        v_[i] = hyper_.beta2 * v_[i] + (1.0 - hyper_.beta2) * gradient[i] * gradient[i];
        const double mhat = m_[i] / bc1;
        const double vhat = v_[i] / bc2;
        params[i] -= hyper_.lr * mhat / (std::sqrt(vhat) + hyper_.eps);
    }
}

LocalTrainResult local_train(const ModelParams& params, const Batch& data, const CircuitTemplate& circuit,
                             double loss_scale, const LocalTrainConfig& cfg, Rng& rng) {
    if (cfg.epochs < 1) throw ConfigError("local epochs must be >= 1");
    if (cfg.batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (data.empty()) throw DataError("client has no training data");

    ModelParams local = params;
    AdamW opt(local.dim(), cfg.optimizer);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    qsim::ShotSampler sampler{cfg.shots, &rng};
    const qsim::ShotSampler* shots = cfg.shots > 0 ? &sampler : nullptr;

    LocalTrainResult out;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const auto rows = std::span<const std::size_t>(order).subspan(start, end - start);
            const Batch mb = data.subset(rows);
            const auto grad = backward(mb, local, circuit, loss_scale, shots);
            opt.step(local.flat, grad.gradient);
            epoch_loss += grad.mean_loss * static_cast<double>(mb.size());
            seen += mb.size();
        }
        epoch_loss /= static_cast<double>(seen);
        if (epoch == 0) out.initial_loss = epoch_loss;
        out.final_loss = epoch_loss;
    }
    out.steps = opt.steps();
    out.delta.resize(local.dim());
    for (std::size_t i = 0; i < out.delta.size(); ++i) out.delta[i] = local.flat[i] - params.flat[i];
    return out;
}

Evaluation evaluate(const ModelParams& params, const CircuitTemplate& circuit, const Batch& data) {
    Evaluation ev;
    if (data.empty()) return ev;
    std::size_t correct = 0;
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto fr = forward(data.input(i), params, circuit);
        if (argmax(fr.logits) == data.labels[i]) ++correct;
        total += loss(fr.logits, data.labels[i]);
    }
    ev.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(data.size());
    ev.mean_loss = total / static_cast<double>(data.size());
    return ev;
}

int argmax(std::span<const double> logits) {
    return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

}  // namespace qfl::model
