#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "qfl/attacks.hpp"
#include "qfl/errors.hpp"
#include "qfl/hybrid_model.hpp"
#include "qfl/qsim.hpp"

using namespace qfl;

namespace {

qsim::Statevector random_state(int n, Rng& rng) {
    std::normal_distribution<double> nd;
    std::vector<qsim::Complex> a(std::size_t{1} << n);
    for (auto& x : a) x = {nd(rng), nd(rng)};
    return qsim::Statevector::from_amplitudes(n, std::move(a));
}

oracle::Vec to_vec(const qsim::Statevector& s) {
    oracle::Vec v(static_cast<Eigen::Index>(s.dim()));
    for (std::size_t i = 0; i < s.dim(); ++i) v(static_cast<Eigen::Index>(i)) = s[i];
    return v;
}

double max_diff(const qsim::Statevector& s, const oracle::Vec& v) {
    double worst = 0.0;
    for (std::size_t i = 0; i < s.dim(); ++i) worst = std::max(worst, std::abs(s[i] - v(static_cast<Eigen::Index>(i))));
    return worst;
}

}  // namespace

TEST_CASE("basis ordering puts wire 0 at the most significant bit") {
    qsim::Statevector s(3);
    qsim::apply_gate(s, qsim::Gate::x(0));
    CHECK(std::abs(s[4] - qsim::Complex(1.0)) < 1e-15);
    CHECK(s.mask(0) == 4);
    CHECK(s.mask(2) == 1);
}

TEST_CASE("single-wire gates match Kronecker-product matrices") {
    Rng rng(11);
    std::uniform_real_distribution<double> ang(-3.0, 3.0);
    const int n = 4;
    for (int trial = 0; trial < 30; ++trial) {
        const int w = trial % n;
        const double t = ang(rng);
        const auto psi = random_state(n, rng);
        const std::vector<std::pair<qsim::Gate, oracle::Mat>> cases{
            {qsim::Gate::rx(w, t), oracle::rx(t)},     {qsim::Gate::ry(w, t), oracle::ry(t)},
            {qsim::Gate::rz(w, t), oracle::rz(t)},     {qsim::Gate::phase(w, t), oracle::phase(t)},
            {qsim::Gate::x(w), oracle::pauli_x()},     {qsim::Gate::h(w), oracle::hadamard()},
            {qsim::Gate::z(w), oracle::phase(std::numbers::pi)},
        };
        for (const auto& [gate, u] : cases) {
            auto s = psi;
            qsim::apply_gate(s, gate);
            CHECK(max_diff(s, oracle::embed(u, w, n) * to_vec(psi)) < 1e-12);
        }
    }
}

TEST_CASE("CNOT and MCX match permutation matrices") {
    Rng rng(12);
    const int n = 4;
    const auto psi = random_state(n, rng);
    auto s = psi;
    qsim::apply_gate(s, qsim::Gate::cnot(2, 0));
    CHECK(max_diff(s, oracle::controlled_x({2}, 0, n) * to_vec(psi)) < 1e-14);
    s = psi;
    qsim::apply_gate(s, qsim::Gate::mcx({0, 1, 3}, 2));
    CHECK(max_diff(s, oracle::controlled_x({0, 1, 3}, 2, n) * to_vec(psi)) < 1e-14);
}

TEST_CASE("QFT equals the DFT matrix and the inverse undoes it") {
    Rng rng(13);
    for (int n = 1; n <= 5; ++n) {
        const auto psi = random_state(n, rng);
        std::vector<int> wires(n);
        std::iota(wires.begin(), wires.end(), 0);
        auto s = psi;
        qsim::apply_gate(s, qsim::Gate::qft(wires));
        CHECK(max_diff(s, oracle::dft(n) * to_vec(psi)) < 1e-12);
        qsim::apply_gate(s, qsim::Gate::inverse_qft(wires));
        CHECK(max_diff(s, to_vec(psi)) < 1e-12);
    }
}

TEST_CASE("phase oracle negates exactly the marked basis states") {
    Rng rng(14);
    const auto psi = random_state(3, rng);
    auto s = psi;
    qsim::apply_gate(s, qsim::Gate::phase_oracle({0, 2}, {1, 0}));
    for (std::size_t i = 0; i < s.dim(); ++i) {
        const bool marked = oracle::bit(i, 0, 3) == 1 && oracle::bit(i, 2, 3) == 0;
        CHECK(std::abs(s[i] - (marked ? -psi[i] : psi[i])) < 1e-15);
    }
}

TEST_CASE("random circuits preserve the norm") {
    Rng rng(15);
    std::uniform_real_distribution<double> ang(-3.0, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
        auto s = random_state(5, rng);
        for (int g = 0; g < 30; ++g) {
            const int w = g % 5;
            qsim::apply_gate(s, qsim::Gate::rx(w, ang(rng)));
            qsim::apply_gate(s, qsim::Gate::cnot(w, (w + 2) % 5));
            qsim::apply_gate(s, qsim::Gate::ry(w, ang(rng)));
        }
        CHECK(std::abs(s.norm_squared() - 1.0) < 1e-12);
    }
}

TEST_CASE("diagonal gates commute") {
    Rng rng(16);
    const auto psi = random_state(3, rng);
    const auto a = qsim::Gate::rz(1, 0.7);
    const auto b = qsim::Gate::phase_oracle({0, 1, 2}, {1, 1, 0});
    const auto c = qsim::Gate::phase(1, 1.3);
    auto s1 = psi, s2 = psi;
    for (const auto& g : {a, b, c}) qsim::apply_gate(s1, g);
    for (const auto& g : {c, b, a}) qsim::apply_gate(s2, g);
    for (std::size_t i = 0; i < s1.dim(); ++i) CHECK(std::abs(s1[i] - s2[i]) < 1e-14);
    CHECK(qsim::is_diagonal(qsim::GateKind::PhaseOracle));
    CHECK_FALSE(qsim::is_diagonal(qsim::GateKind::RX));
}

TEST_CASE("X conjugation negates Z and RX(2a) gives cos(2a)") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        auto s = random_state(3, rng);
        const double before = qsim::expectation(s, qsim::Observable::z(2));
        qsim::apply_gate(s, qsim::Gate::x(2));
        CHECK(qsim::expectation(s, qsim::Observable::z(2)) == doctest::Approx(-before).epsilon(1e-12));
    }
    for (double a : {0.0, 0.3, std::numbers::pi / 4, 1.1, 2.5}) {
        qsim::Statevector s(1);
        qsim::apply_gate(s, qsim::Gate::rx(0, 2 * a));
        CHECK(qsim::expectation(s, qsim::Observable::z(0)) == doctest::Approx(std::cos(2 * a)).epsilon(1e-12));
    }
}

TEST_CASE("multi-wire Z observable and batched expectations agree with the dense oracle") {
    Rng rng(18);
    const auto psi = random_state(4, rng);
    const auto v = to_vec(psi);
    const std::vector<int> wires{0, 1, 2, 3};
    const auto zs = qsim::z_expectations(psi, wires);
    for (int w = 0; w < 4; ++w) CHECK(zs[w] == doctest::Approx(oracle::z_expect(v, w, 4)).epsilon(1e-12));
    double zz = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        zz += ((oracle::bit(i, 0, 4) ^ oracle::bit(i, 3, 4)) ? -1.0 : 1.0) * std::norm(v(i));
    CHECK(qsim::expectation(psi, qsim::Observable{{0, 3}}) == doctest::Approx(zz).epsilon(1e-12));
}

TEST_CASE("zero-parameter model circuit leaves |0...0> fixed") {
    const auto arch = model::ModelArchitecture::mnist();
    const auto circuit = model::clean_template(arch);
    std::vector<double> params(circuit.n_params(), 0.0), inputs(circuit.n_inputs(), 0.0);
    const auto out = qsim::apply_circuit(qsim::Statevector(arch.n_wires()), circuit, params, inputs);
    CHECK(out.n_wires() == 5);
    CHECK(std::abs(out[0] - qsim::Complex(1.0)) < 1e-14);
}

TEST_CASE("parameter-shift Jacobian matches central differences") {
    Rng rng(19);
    qsim::CircuitTemplate c(3);
    c.add(qsim::Gate::encoder(qsim::GateKind::RX, 0, 0));
    c.add(qsim::Gate::encoder(qsim::GateKind::RY, 1, 1));
    c.add(qsim::Gate::trainable(qsim::GateKind::RX, 0, 0));
    c.add(qsim::Gate::cnot(0, 1));
    c.add(qsim::Gate::trainable(qsim::GateKind::RY, 1, 1));
    c.add(qsim::Gate::trainable(qsim::GateKind::RZ, 2, 2));
    c.add(qsim::Gate::h(2));
    c.add(qsim::Gate::trainable(qsim::GateKind::RY, 2, 0));  // shared slot
    c.add(qsim::Gate::cnot(1, 2));
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<double> p{u(rng), u(rng), u(rng)}, x{u(rng), u(rng)};
    const std::vector<qsim::Observable> obs{qsim::Observable::z(0), qsim::Observable::z(2), qsim::Observable{{1, 2}}};
    const auto jac = qsim::parameter_shift_jacobian(c, p, x, obs);
    const double h = 1e-6;
    for (int k = 0; k < 3; ++k) {
        auto hi = p, lo = p;
        hi[k] += h;
        lo[k] -= h;
        const auto sh = qsim::apply_circuit(qsim::Statevector(3), c, hi, x);
        const auto sl = qsim::apply_circuit(qsim::Statevector(3), c, lo, x);
        for (std::size_t j = 0; j < obs.size(); ++j) {
            const double fd = (qsim::expectation(sh, obs[j]) - qsim::expectation(sl, obs[j])) / (2 * h);
            CHECK(jac(static_cast<Eigen::Index>(j), k) == doctest::Approx(fd).epsilon(1e-6));
        }
    }
    const std::vector<int> wires{0, 1, 2};
    const auto fj = qsim::z_features_with_jacobians(c, p, x, wires);
    for (int w = 0; w < 3; ++w) {
        const auto one = qsim::parameter_shift_jacobian(c, p, x, std::vector<qsim::Observable>{qsim::Observable::z(w)});
        for (int k = 0; k < 3; ++k) CHECK(fj.d_params(w, k) == doctest::Approx(one(0, k)).epsilon(1e-12));
    }
}

TEST_CASE("shot sampling converges to exact probabilities") {
    Rng rng(20);
    qsim::Statevector s(2);
    qsim::apply_gate(s, qsim::Gate::ry(0, 1.0));
    qsim::apply_gate(s, qsim::Gate::h(1));
    const long shots = 200000;
    const auto counts = qsim::sample_bitstrings(s, shots, rng);
    long total = 0;
    for (const auto& [k, c] : counts) total += c;
    CHECK(total == shots);
    const double p10 = std::norm(s[2]);
    CHECK(double(counts.at("10")) / shots == doctest::Approx(p10).epsilon(0.02));
    const std::vector<int> wires{0};
    CHECK(qsim::sampled_z_expectations(s, wires, shots, rng)[0] == doctest::Approx(std::cos(1.0)).epsilon(0.02));
}

TEST_CASE("invalid circuits are rejected") {
    CHECK_THROWS_AS(qsim::Statevector(0), ConfigError);
    CHECK_THROWS_AS(qsim::Statevector(qsim::kMaxWires + 1), ConfigError);
    CHECK_THROWS_AS(qsim::validate(qsim::Gate::cnot(1, 1), 3), CircuitError);
    CHECK_THROWS_AS(qsim::validate(qsim::Gate::x(3), 3), CircuitError);
    CHECK_THROWS_AS(qsim::validate(qsim::Gate::phase_oracle({0, 1}, {1}), 3), CircuitError);
    qsim::CircuitTemplate c(2);
    c.add(qsim::Gate::trainable(qsim::GateKind::RX, 0, 1));
    std::vector<double> too_short{0.1};
    CHECK_THROWS_AS(qsim::apply_circuit(qsim::Statevector(2), c, too_short, {}), CircuitError);
    qsim::CircuitTemplate bad(1);
    bad.add(qsim::Gate::trainable(qsim::GateKind::Phase, 0, 0));
    std::vector<double> p{0.3};
    CHECK_THROWS_AS(qsim::parameter_shift_jacobian(bad, p, {}, std::vector<qsim::Observable>{qsim::Observable::z(0)}),
                    UnsupportedTemplateError);
}

TEST_CASE("insert moves anchors at or after the splice point") {
    qsim::CircuitTemplate c(2);
    c.add(qsim::Gate::h(0));
    c.mark_encoding_end();
    c.add(qsim::Gate::h(1));
    c.mark_final_block_begin();
    c.add(qsim::Gate::x(0));
    const std::vector<qsim::Gate> block{qsim::Gate::z(0), qsim::Gate::z(1)};
    c.insert(1, block);
    CHECK(c.encoding_end() == 3);
    CHECK(c.final_block_begin() == 4);
    CHECK(c.gates().size() == 5);
}
