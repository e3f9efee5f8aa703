#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "oracles.hpp"
#include "signet/qcnn.hpp"
#include "signet/rng.hpp"
#include "signet/statevector.hpp"

using namespace signet;

namespace {

std::vector<double> random_pixels(std::size_t n, Rng& rng) {
    std::vector<double> px(n);
    for (auto& v : px) v = rng.uniform(-1.0, 1.0);
    return px;
}

QcnnParams random_params(const CircuitTopology& topo, Rng& rng) {
    QcnnParams p = QcnnParams::zeros(topo);
    for (auto& v : p.rotation) v = rng.uniform(-3.14159, 3.14159);
    for (auto& v : p.conv) v = rng.uniform(-3.14159, 3.14159);
    for (auto& v : p.pool) v = rng.uniform(-3.14159, 3.14159);
    return p;
}

StateVector random_state(int n_qubits, Rng& rng) {
    StateVector s;
    s.n_qubits = n_qubits;
    s.amps.resize(std::size_t(1) << n_qubits);
    double norm = 0.0;
    for (auto& a : s.amps) {
        a = cplx(rng.normal(), rng.normal());
        norm += std::norm(a);
    }
    double inv = 1.0 / std::sqrt(norm);
    for (auto& a : s.amps) a *= inv;
    return s;
}

CircuitTopology reduced2() {
    CircuitTopology t;
    t.n_qubits = 2;
    t.rotation_qubits = {1, 2};
    t.conv_layers = {{{1, 2}}};
    t.pool_layers = {{{1, 2}}};
    t.readout_qubit = 2;
    t.validate();
    return t;
}

}  // namespace

TEST_CASE("amplitude encoding basics", "[encode]") {
    std::vector<double> spike(3072, 0.0);
    spike[0] = 5.0;
    StateVector s = amplitude_encode(std::span<const double>(spike), 12);
    REQUIRE(s.amps[0] == cplx(1.0, 0.0));
    for (std::size_t i = 1; i < s.dim(); ++i) REQUIRE(s.amps[i] == cplx(0.0, 0.0));

    std::vector<double> ones(3072, 1.0);
    StateVector u = amplitude_encode(std::span<const double>(ones), 12);
    double expect = 1.0 / std::sqrt(3072.0);
    REQUIRE(std::abs(u.amps[0].real() - expect) < 1e-15);
    REQUIRE(std::abs(expect - 0.0180422) < 1e-6);
    for (std::size_t i = 3072; i < 4096; ++i) REQUIRE(u.amps[i] == cplx(0.0, 0.0));

    std::vector<double> zeros(3072, 0.0);
    REQUIRE_THROWS_AS(amplitude_encode(std::span<const double>(zeros), 12), std::invalid_argument);
}

TEST_CASE("amplitude encoding preserves ratios and normalizes exactly", "[encode][oracle]") {
    Rng rng(41);
    auto px = random_pixels(3072, rng);
    StateVector s = amplitude_encode(std::span<const double>(px), 12);
    REQUIRE(std::abs(s.norm_sq() - 1.0) < 1e-12);
    // amplitude ratios equal pixel ratios
    REQUIRE(std::abs(s.amps[100].real() / s.amps[200].real() - px[100] / px[200]) < 1e-9);
}

TEST_CASE("rotation gates", "[gates]") {
    StateVector s = StateVector::basis(2, 0);
    StateVector before = s;
    apply_ry(s, 1, 0.0);
    REQUIRE(s.amps == before.amps);  // bit-equal for Ry(0)
    apply_rz(s, 1, 0.0);
    for (std::size_t i = 0; i < s.dim(); ++i) REQUIRE(std::abs(s.amps[i] - before.amps[i]) < 1e-15);

    StateVector f = StateVector::basis(1, 0);
    apply_ry(f, 1, 3.14159265358979323846);
    REQUIRE(std::abs(f.amps[0]) < 1e-12);
    REQUIRE(std::abs(f.amps[1] - cplx(1.0, 0.0)) < 1e-12);

    REQUIRE_THROWS_AS(apply_ry(f, 3, 0.1), std::invalid_argument);

    Rng rng(42);
    StateVector r = random_state(4, rng);
    apply_ry(r, 2, rng.uniform(-3.0, 3.0));
    apply_rz(r, 3, rng.uniform(-3.0, 3.0));
    REQUIRE(std::abs(r.norm_sq() - 1.0) < 1e-12);
}

TEST_CASE("two-qubit applicator", "[gates]") {
    // identity leaves any state unchanged
    std::array<cplx, 16> eye{};
    for (int i = 0; i < 4; ++i) eye[i * 4 + i] = cplx(1, 0);
    Rng rng(43);
    StateVector s = random_state(3, rng);
    StateVector before = s;
    apply_two_qubit(s, eye, 1, 3);
    for (std::size_t i = 0; i < s.dim(); ++i) REQUIRE(std::abs(s.amps[i] - before.amps[i]) < 1e-15);

    // CNOT truth table: |10> (control qubit 1 set) -> |11>
    std::array<cplx, 16> cnot{};
    cnot[0 * 4 + 0] = cplx(1, 0);   // |00> -> |00>
    cnot[3 * 4 + 1] = cplx(1, 0);   // |01> (qa=1) -> |11>
    cnot[2 * 4 + 2] = cplx(1, 0);   // |10> -> |10>
    cnot[1 * 4 + 3] = cplx(1, 0);   // |11> -> |01>
    StateVector t = StateVector::basis(2, 0b01);  // qubit 1 set
    apply_two_qubit(t, cnot, 1, 2);
    REQUIRE(std::abs(t.amps[0b11] - cplx(1.0, 0.0)) < 1e-12);

    // non-unitary and self-pair rejections
    std::array<cplx, 16> bad = eye;
    bad[0] = cplx(2, 0);
    REQUIRE_THROWS_AS(apply_two_qubit(t, bad, 1, 2), std::invalid_argument);
    REQUIRE_THROWS_AS(apply_two_qubit(t, eye, 2, 2), std::invalid_argument);

    // conjugate-transpose restores a random state
    Rng rng2(44);
    StateVector u = random_state(4, rng2);
    StateVector orig = u;
    // build a random unitary from rotations on the 4-dim subspace via gates:
    std::array<cplx, 16> g{};
    double a = 0.7, b = -1.2;
    // kron(Ry(b) on qb, Ry(a) on qa)
    auto ry = [](double t) {
        return std::array<cplx, 4>{cplx(std::cos(t / 2), 0), cplx(-std::sin(t / 2), 0),
                                   cplx(std::sin(t / 2), 0), cplx(std::cos(t / 2), 0)};
    };
    auto ra = ry(a), rb = ry(b);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                for (int l = 0; l < 2; ++l) g[(i * 2 + k) * 4 + (j * 2 + l)] = rb[i * 2 + j] * ra[k * 2 + l];
    apply_two_qubit(u, g, 2, 4);
    REQUIRE(std::abs(u.norm_sq() - 1.0) < 1e-10);
    std::array<cplx, 16> gdag{};
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) gdag[r * 4 + c] = std::conj(g[c * 4 + r]);
    apply_two_qubit(u, gdag, 2, 4);
    for (std::size_t i = 0; i < u.dim(); ++i) REQUIRE(std::abs(u.amps[i] - orig.amps[i]) < 1e-10);
}

TEST_CASE("conv unit semantics", "[units]") {
    CircuitTopology topo = reduced2();
    // phi1 = phi2 = 0 on |00>: CZ fixes |00>
    StateVector s = StateVector::basis(2, 0);
    conv_unit_U(s, topo, 0, 1, 2, 0.0, 0.0);
    REQUIRE(std::abs(s.amps[0] - cplx(1.0, 0.0)) < 1e-12);

    // phi1 = pi flips qubit 1; CZ leaves |01> alone (only |11> gains a phase)
    StateVector t = StateVector::basis(2, 0);
    conv_unit_U(t, topo, 0, 1, 2, 3.14159265358979323846, 0.0);
    REQUIRE(std::abs(t.amps[0b01] - cplx(1.0, 0.0)) < 1e-12);

    REQUIRE_THROWS_WITH(conv_unit_U(t, topo, 0, 2, 1, 0.0, 0.0),
                        Catch::Matchers::ContainsSubstring("not in conv layer"));

    // unitarity: applying U then its adjoint sequence restores the state
    Rng rng(45);
    StateVector r = random_state(2, rng);
    StateVector orig = r;
    double p1 = 0.9, p2 = -0.4;
    conv_unit_U(r, topo, 0, 1, 2, p1, p2);
    apply_cz(r, 1, 2);  // CZ is self-inverse
    apply_ry(r, 2, -p2);
    apply_ry(r, 1, -p1);
    for (std::size_t i = 0; i < r.dim(); ++i) REQUIRE(std::abs(r.amps[i] - orig.amps[i]) < 1e-10);
}

TEST_CASE("pool unit semantics", "[units]") {
    CircuitTopology topo = reduced2();
    // control |0>: keep qubit unchanged for any phi
    StateVector s = StateVector::basis(2, 0);
    pool_unit_P(s, topo, 0, 1, 2, 2.2);
    REQUIRE(std::abs(s.amps[0] - cplx(1.0, 0.0)) < 1e-12);

    // phi = 0: identity
    Rng rng(46);
    StateVector r = random_state(2, rng);
    StateVector orig = r;
    pool_unit_P(r, topo, 0, 1, 2, 0.0);
    for (std::size_t i = 0; i < r.dim(); ++i) REQUIRE(std::abs(r.amps[i] - orig.amps[i]) < 1e-12);

    // norm preserved on random states
    StateVector q = random_state(2, rng);
    pool_unit_P(q, topo, 0, 1, 2, rng.uniform(-3.0, 3.0));
    REQUIRE(std::abs(q.norm_sq() - 1.0) < 1e-12);

    REQUIRE_THROWS_WITH(pool_unit_P(q, topo, 0, 2, 1, 0.1),
                        Catch::Matchers::ContainsSubstring("not in pool layer"));

    // control set: controlled-Ry acts as plain Ry on the target
    StateVector c1 = StateVector::basis(2, 0b01);
    apply_cry(c1, 1, 2, 1.3);
    StateVector ref = StateVector::basis(2, 0b01);
    apply_ry(ref, 2, 1.3);
    for (std::size_t i = 0; i < c1.dim(); ++i) REQUIRE(std::abs(c1.amps[i] - ref.amps[i]) < 1e-12);
}

TEST_CASE("topology validation", "[topology]") {
    CircuitTopology t = CircuitTopology::standard12();
    REQUIRE(t.param_count() == 57);
    REQUIRE(t.conv_unit_count() == 11);
    REQUIRE(t.pool_unit_count() == 11);

    // discarded qubit reused later -> rejected
    CircuitTopology bad = t;
    bad.conv_layers[1][0] = {1, 4};  // qubit 1 was discarded by pool layer 1
    REQUIRE_THROWS_WITH(bad.validate(), Catch::Matchers::ContainsSubstring("discarded"));

    // readout must survive pooling
    CircuitTopology bad2 = reduced2();
    bad2.readout_qubit = 1;
    REQUIRE_THROWS_WITH(bad2.validate(), Catch::Matchers::ContainsSubstring("readout"));
}

TEST_CASE("qcnn expectation identity circuit and bounds", "[qcnn]") {
    CircuitTopology topo = CircuitTopology::standard12();
    QcnnParams zero = QcnnParams::zeros(topo);
    std::vector<double> spike(3072, 0.0);
    spike[0] = 1.0;
    // all-angles-zero circuit keeps |b0>, qubit 12 reads +1
    REQUIRE(qcnn_expectation(std::span<const double>(spike), zero, topo) == Catch::Approx(1.0).epsilon(1e-12));

    Rng rng(47);
    for (int trial = 0; trial < 5; ++trial) {
        auto px = random_pixels(3072, rng);
        auto p = random_params(topo, rng);
        double o = qcnn_expectation(std::span<const double>(px), p, topo);
        REQUIRE(o >= -1.0);
        REQUIRE(o <= 1.0);
    }
}

TEST_CASE("norm preserved across ten thousand random gates", "[qcnn][invariant]") {
    Rng rng(48);
    StateVector s = random_state(12, rng);
    for (int i = 0; i < 10000; ++i) {
        int pick = static_cast<int>(rng.uniform_int(0, 4));
        int qa = static_cast<int>(rng.uniform_int(1, 12));
        int qb = static_cast<int>(rng.uniform_int(1, 12));
        while (qb == qa) qb = static_cast<int>(rng.uniform_int(1, 12));
        double angle = rng.uniform(-3.14159, 3.14159);
        switch (pick) {
            case 0: apply_ry(s, qa, angle); break;
            case 1: apply_rz(s, qa, angle); break;
            case 2: apply_cz(s, qa, qb); break;
            case 3: apply_cnot(s, qa, qb); break;
            default: apply_cry(s, qa, qb, angle); break;
        }
    }
    REQUIRE(std::abs(s.norm_sq() - 1.0) <= 1e-9);
}

TEST_CASE("gate locality: marginals of untouched qubits are invariant", "[qcnn][invariant]") {
    Rng rng(49);
    StateVector s = random_state(5, rng);
    std::vector<double> before(5);
    for (int q = 1; q <= 5; ++q) before[q - 1] = marginal_one(s, q);
    conv_unit_U(s, [] {
        CircuitTopology t;
        t.n_qubits = 5;
        t.rotation_qubits = {1, 2, 3, 4, 5};
        t.conv_layers = {{{2, 4}}};
        t.pool_layers = {{{2, 4}}};
        t.readout_qubit = 5;
        t.validate();
        return t;
    }(), 0, 2, 4, 0.8, -1.1);
    for (int q : {1, 3, 5})
        REQUIRE(marginal_one(s, q) == Catch::Approx(before[q - 1]).margin(1e-12));
}

TEST_CASE("layered simulator matches the dense-unitary oracle on small circuits", "[qcnn][oracle]") {
    Rng rng(50);
    for (int n : {2, 4}) {
        CircuitTopology topo;
        if (n == 2) {
            topo = reduced2();
        } else {
            topo.n_qubits = 4;
            topo.rotation_qubits = {1, 2, 3, 4};
            topo.conv_layers = {{{1, 2}, {3, 4}}, {{2, 4}}};
            topo.pool_layers = {{{1, 2}, {3, 4}}, {{2, 4}}};
            topo.readout_qubit = 4;
            topo.validate();
        }
        for (int trial = 0; trial < 5; ++trial) {
            auto px = random_pixels((std::size_t(1) << n) - 1, rng);
            auto p = random_params(topo, rng);
            StateVector fast = qcnn_state(std::span<const double>(px), p, topo);

            StateVector enc = amplitude_encode(std::span<const double>(px), n);
            auto u = oracle::circuit_unitary(topo, p);
            auto dense = oracle::apply_matrix(u, enc.amps);
            for (std::size_t i = 0; i < fast.dim(); ++i)
                REQUIRE(std::abs(fast.amps[i] - dense[i]) < 1e-10);

            // expectation agrees too
            double o_fast = qcnn_expectation(std::span<const double>(px), p, topo);
            double o_dense = 0.0;
            std::size_t mask = std::size_t(1) << (topo.readout_qubit - 1);
            for (std::size_t i = 0; i < dense.size(); ++i)
                o_dense += ((i & mask) ? -1.0 : 1.0) * std::norm(dense[i]);
            REQUIRE(o_fast == Catch::Approx(o_dense).margin(1e-10));
        }
    }
}

TEST_CASE("single-rotation parameter shift is exact", "[grad]") {
    // O(t) = cos t for Ry(t) then <Z> on |0>; at t = pi/3 the gradient is
    // -sin(pi/3) = -sqrt(3)/2.
    CircuitTopology topo;
    topo.n_qubits = 1;
    topo.rotation_qubits = {1};
    topo.readout_qubit = 1;
    topo.validate();
    QcnnParams p = QcnnParams::zeros(topo);
    p.rotation[0] = 3.14159265358979323846 / 3.0;
    p.rotation[1] = 0.0;
    std::vector<double> px = {1.0};
    auto g = qcnn_grad_shift(std::span<const double>(px), p, topo);
    REQUIRE(g[0] == Catch::Approx(-std::sqrt(3.0) / 2.0).epsilon(1e-12));
    REQUIRE(g[1] == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("disconnected parameters have exactly zero gradient", "[grad]") {
    // Rotations on qubits 1 and 2 never touch the readout qubit 3: every
    // parameter is dead and the readout is flat in all of them.
    CircuitTopology topo;
    topo.n_qubits = 3;
    topo.rotation_qubits = {1, 2};
    topo.readout_qubit = 3;
    topo.validate();
    Rng rng(51);
    QcnnParams p = random_params(topo, rng);
    auto px = random_pixels(7, rng);
    auto gs = qcnn_grad_shift(std::span<const double>(px), p, topo);
    for (double v : gs) REQUIRE(v == Catch::Approx(0.0).margin(1e-12));
    // the flat function also yields an all-zero finite-difference gradient
    auto gf = qcnn_grad_fd(std::span<const double>(px), p, topo);
    for (double v : gf) REQUIRE(v == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("finite differences agree with parameter shift on the full circuit", "[grad][oracle]") {
    CircuitTopology topo = CircuitTopology::standard12();
    Rng rng(52);
    auto px = random_pixels(3072, rng);
    auto p = random_params(topo, rng);
    auto fd = qcnn_grad_fd(std::span<const double>(px), p, topo, 1e-4);
    auto ps = qcnn_grad_shift(std::span<const double>(px), p, topo);
    REQUIRE(fd.size() == 57);
    for (std::size_t j = 0; j < fd.size(); ++j) REQUIRE(fd[j] == Catch::Approx(ps[j]).margin(1e-6));
}

TEST_CASE("halving epsilon shrinks the finite-difference error about fourfold", "[grad][oracle]") {
    CircuitTopology topo = reduced2();
    Rng rng(53);
    auto px = random_pixels(3, rng);
    auto p = random_params(topo, rng);
    auto exact = qcnn_grad_shift(std::span<const double>(px), p, topo);
    auto err = [&](double eps) {
        auto fd = qcnn_grad_fd(std::span<const double>(px), p, topo, eps);
        double worst = 0.0;
        for (std::size_t j = 0; j < fd.size(); ++j) worst = std::max(worst, std::abs(fd[j] - exact[j]));
        return worst;
    };
    double e1 = err(2e-2);
    double e2 = err(1e-2);
    REQUIRE(e2 < e1);                 // second order: error falls with epsilon
    REQUIRE(e1 / e2 == Catch::Approx(4.0).epsilon(0.35));
}

TEST_CASE("qcnn rejects bad epsilon", "[grad]") {
    CircuitTopology topo = reduced2();
    QcnnParams p = QcnnParams::zeros(topo);
    std::vector<double> px = {1.0, 0.0, 0.0};
    REQUIRE_THROWS_AS(qcnn_grad_fd(std::span<const double>(px), p, topo, 0.0), std::invalid_argument);
}
