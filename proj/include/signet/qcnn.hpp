#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "signet/common.hpp"
#include "signet/statevector.hpp"

namespace signet {

// ---------------------------------------------------------------------------
// Quantum convolutional network over an amplitude-encoded image.
//
// Circuit layout (Fig.-7 style funnel): one rotation layer of Ry(t1), Rz(t2)
// per active qubit, then alternating convolution and pooling layers. A conv
// unit U(p1, p2) on pair (a, b) is Ry(p1) on a, Ry(p2) on b, then CZ(a, b).
// A pool unit P(p) is a controlled-Ry(p) with the discarded qubit as control
// and the kept qubit as target; the discarded qubit is never addressed again.
// Readout is <Z> on the surviving qubit.
// ---------------------------------------------------------------------------

struct CircuitTopology {
    int n_qubits = 12;
    std::vector<int> rotation_qubits;                          // rotation layer targets
    std::vector<std::vector<std::pair<int, int>>> conv_layers;  // (qa, qb) per layer
    std::vector<std::vector<std::pair<int, int>>> pool_layers;  // (discard, keep) per layer
    int readout_qubit = 12;

    std::size_t conv_unit_count() const {
        std::size_t n = 0;
        for (const auto& l : conv_layers) n += l.size();
        return n;
    }
    std::size_t pool_unit_count() const {
        std::size_t n = 0;
        for (const auto& l : pool_layers) n += l.size();
        return n;
    }
    /// 2 angles per rotation qubit + 2 per conv unit + 1 per pool unit.
    std::size_t param_count() const {
        return 2 * rotation_qubits.size() + 2 * conv_unit_count() + pool_unit_count();
    }

    /// Structural checks: matched conv/pool layer counts, discarded qubits
    /// never reappear, and the readout qubit survives every pooling layer.
    void validate() const {
        require(n_qubits >= 1, "topology: need at least one qubit");
        require(readout_qubit >= 1 && readout_qubit <= n_qubits, "topology: readout qubit out of range");
        require(conv_layers.size() == pool_layers.size(),
                "topology: conv layer count (" + std::to_string(conv_layers.size()) +
                    ") must equal pool layer count (" + std::to_string(pool_layers.size()) + ")");
        auto check_range = [&](int q) {
            require(q >= 1 && q <= n_qubits, "topology: qubit " + std::to_string(q) + " out of range");
        };
        for (int q : rotation_qubits) check_range(q);
        std::set<int> discarded;
        for (std::size_t layer = 0; layer < conv_layers.size(); ++layer) {
            for (auto [a, b] : conv_layers[layer]) {
                check_range(a);
                check_range(b);
                require(a != b, "topology: conv pair on a single qubit");
                require(!discarded.count(a) && !discarded.count(b),
                        "topology: conv layer " + std::to_string(layer + 1) + " touches a discarded qubit");
            }
            for (auto [d, k] : pool_layers[layer]) {
                check_range(d);
                check_range(k);
                require(d != k, "topology: pool pair on a single qubit");
                require(!discarded.count(d) && !discarded.count(k),
                        "topology: pool layer " + std::to_string(layer + 1) + " touches a discarded qubit");
            }
            for (auto [d, k] : pool_layers[layer]) {
                (void)k;
                discarded.insert(d);
            }
        }
        require(!discarded.count(readout_qubit), "topology: readout qubit is discarded by pooling");
    }

    /// The default 12-qubit funnel: pairs (1,2)(3,4)...(11,12) keeping evens,
    /// then (2,4)(6,8)(10,12) keeping {4,8,12}, then (4,8)(8,12) keeping {12}.
    /// Pooling always discards the first qubit of the pair. 57 parameters.
    static CircuitTopology standard12() {
        CircuitTopology t;
        t.n_qubits = 12;
        t.readout_qubit = 12;
        for (int q = 1; q <= 12; ++q) t.rotation_qubits.push_back(q);
        t.conv_layers = {
            {{1, 2}, {3, 4}, {5, 6}, {7, 8}, {9, 10}, {11, 12}},
            {{2, 4}, {6, 8}, {10, 12}},
            {{4, 8}, {8, 12}},
        };
        t.pool_layers = t.conv_layers;  // pool the same pairs, discarding the first
        t.validate();
        return t;
    }
};

/// Angles for one circuit, grouped as the topology is: per-qubit rotation
/// pairs (theta_y, theta_z), conv unit angles layer by layer, pool unit
/// angles layer by layer. Flat order is rotation, conv, pool.
struct QcnnParams {
    std::vector<double> rotation;  // 2 per rotation qubit
    std::vector<double> conv;      // 2 per conv unit
    std::vector<double> pool;      // 1 per pool unit

    static QcnnParams zeros(const CircuitTopology& topo) {
        QcnnParams p;
        p.rotation.assign(2 * topo.rotation_qubits.size(), 0.0);
        p.conv.assign(2 * topo.conv_unit_count(), 0.0);
        p.pool.assign(topo.pool_unit_count(), 0.0);
        return p;
    }

    std::size_t size() const { return rotation.size() + conv.size() + pool.size(); }

    std::vector<double> flatten() const {
        std::vector<double> out;
        out.reserve(size());
        out.insert(out.end(), rotation.begin(), rotation.end());
        out.insert(out.end(), conv.begin(), conv.end());
        out.insert(out.end(), pool.begin(), pool.end());
        return out;
    }

    static QcnnParams unflatten(const CircuitTopology& topo, std::span<const double> flat) {
        QcnnParams p = zeros(topo);
        require(flat.size() == p.size(), "qcnn params: expected " + std::to_string(p.size()) +
                                             " angles, got " + std::to_string(flat.size()));
        std::size_t i = 0;
        for (auto& v : p.rotation) v = flat[i++];
        for (auto& v : p.conv) v = flat[i++];
        for (auto& v : p.pool) v = flat[i++];
        return p;
    }

    void check(const CircuitTopology& topo) const {
        require(rotation.size() == 2 * topo.rotation_qubits.size(),
                "qcnn params: rotation group size mismatch");
        require(conv.size() == 2 * topo.conv_unit_count(), "qcnn params: conv group size mismatch");
        require(pool.size() == topo.pool_unit_count(), "qcnn params: pool group size mismatch");
    }
};

// ---------------------------------------------------------------------------
// Circuit program: the topology and parameters lowered to a gate list with
// per-gate parameter bindings (angle = coeff * param + shift). This is what
// both gradient methods walk.
// ---------------------------------------------------------------------------

struct GateInstr {
    enum class Kind { Ry, Rz, Cz, DualRy } kind;
    int q1 = 0;        // target (Ry/Rz/DualRy) or first CZ qubit
    int q2 = 0;        // control (DualRy) or second CZ qubit
    int param = -1;    // flat parameter index, -1 for fixed gates
};

struct CircuitProgram {
    std::vector<GateInstr> gates;
    int readout_qubit = 0;

    /// Gate index of the first instruction reading each parameter; every
    /// parameter of this family binds exactly one instruction.
    std::vector<std::size_t> param_position;
};

inline CircuitProgram build_program(const CircuitTopology& topo, const QcnnParams& params) {
    topo.validate();
    params.check(topo);
    CircuitProgram prog;
    prog.readout_qubit = topo.readout_qubit;
    prog.param_position.assign(params.size(), 0);
    std::size_t p = 0;
    auto bind = [&](GateInstr g) {
        if (g.param >= 0) prog.param_position[g.param] = prog.gates.size();
        prog.gates.push_back(g);
    };
    for (int q : topo.rotation_qubits) {
        bind({GateInstr::Kind::Ry, q, 0, static_cast<int>(p++)});
        bind({GateInstr::Kind::Rz, q, 0, static_cast<int>(p++)});
    }
    std::size_t pool_param = 2 * topo.rotation_qubits.size() + 2 * topo.conv_unit_count();
    for (std::size_t layer = 0; layer < topo.conv_layers.size(); ++layer) {
        for (auto [a, b] : topo.conv_layers[layer]) {
            bind({GateInstr::Kind::Ry, a, 0, static_cast<int>(p++)});
            bind({GateInstr::Kind::Ry, b, 0, static_cast<int>(p++)});
            bind({GateInstr::Kind::Cz, a, b, -1});
        }
        for (auto [discard, keep] : topo.pool_layers[layer]) {
            bind({GateInstr::Kind::DualRy, keep, discard, static_cast<int>(pool_param++)});
        }
    }
    return prog;
}

namespace detail {

struct GateShift {
    std::size_t gate = 0;  // index into prog.gates
    double offset = 0.0;   // added to that gate's angle slot
    int slot = 0;          // DualRy decomposition slot (0 or 1), unused otherwise
};

inline void apply_gate(StateVector& s, const GateInstr& g, std::span<const double> flat,
                       const GateShift* shift, std::size_t gate_index) {
    double angle = g.param >= 0 ? flat[g.param] : 0.0;
    bool shifted = shift != nullptr && shift->gate == gate_index;
    switch (g.kind) {
        case GateInstr::Kind::Ry:
            apply_ry(s, g.q1, shifted ? angle + shift->offset : angle);
            break;
        case GateInstr::Kind::Rz:
            apply_rz(s, g.q1, shifted ? angle + shift->offset : angle);
            break;
        case GateInstr::Kind::Cz:
            apply_cz(s, g.q1, g.q2);
            break;
        case GateInstr::Kind::DualRy: {
            // Controlled-Ry(angle), realized through its half-angle
            // decomposition Ry(a/2) CNOT Ry(-a/2) CNOT for shift purposes:
            // shifting decomposition slot 0 by s gives branch angles
            // (s, angle + s); shifting slot 1 gives (s, angle - s).
            double a0 = 0.0, a1 = angle;
            if (shifted) {
                a0 = shift->offset;
                a1 = (shift->slot == 0) ? angle + shift->offset : angle - shift->offset;
            }
            apply_dual_ry(s, g.q2, g.q1, a0, a1);
            break;
        }
    }
}

}  // namespace detail

/// Runs the program on an encoded state; `shift` optionally perturbs one
/// gate's angle slot (the parameter-shift evaluations).
inline StateVector run_program(const CircuitProgram& prog, StateVector state,
                               std::span<const double> flat_params,
                               const detail::GateShift* shift = nullptr) {
    for (std::size_t i = 0; i < prog.gates.size(); ++i)
        detail::apply_gate(state, prog.gates[i], flat_params, shift, i);
    return state;
}

// ---------------------------------------------------------------------------
// Standalone unit applications (validated against the topology).
// ---------------------------------------------------------------------------

namespace detail {

inline bool pair_in_layer(const std::vector<std::pair<int, int>>& layer, int a, int b) {
    for (auto [x, y] : layer)
        if (x == a && y == b) return true;
    return false;
}

}  // namespace detail

/// Conv unit U(p1, p2) on a pair from the given layer: Ry on each qubit,
/// then CZ across the pair.
inline void conv_unit_U(StateVector& s, const CircuitTopology& topo, std::size_t layer, int qa, int qb,
                        double phi1, double phi2) {
    require(layer < topo.conv_layers.size(), "conv_unit_U: layer out of range");
    require(detail::pair_in_layer(topo.conv_layers[layer], qa, qb),
            "conv_unit_U: pair (" + std::to_string(qa) + "," + std::to_string(qb) +
                ") is not in conv layer " + std::to_string(layer + 1));
    apply_ry(s, qa, phi1);
    apply_ry(s, qb, phi2);
    apply_cz(s, qa, qb);
}

/// Pool unit P(p): controlled-Ry with the discarded qubit as control.
inline void pool_unit_P(StateVector& s, const CircuitTopology& topo, std::size_t layer, int discard,
                        int keep, double phi) {
    require(layer < topo.pool_layers.size(), "pool_unit_P: layer out of range");
    require(detail::pair_in_layer(topo.pool_layers[layer], discard, keep),
            "pool_unit_P: pair (" + std::to_string(discard) + "->" + std::to_string(keep) +
                ") is not in pool layer " + std::to_string(layer + 1));
    apply_cry(s, discard, keep, phi);
}

// ---------------------------------------------------------------------------
// Expectation and gradients.
// ---------------------------------------------------------------------------

template <class Scalar>
StateVector qcnn_state(std::span<const Scalar> pixels, const QcnnParams& params,
                       const CircuitTopology& topo) {
    CircuitProgram prog = build_program(topo, params);
    StateVector s = amplitude_encode(pixels, topo.n_qubits);
    auto flat = params.flatten();
    return run_program(prog, std::move(s), flat);
}

/// <Z_readout> of the full circuit; always in [-1, 1].
template <class Scalar>
double qcnn_expectation(std::span<const Scalar> pixels, const QcnnParams& params,
                        const CircuitTopology& topo) {
    StateVector s = qcnn_state(pixels, params, topo);
    return pauli_z_expectation(s, topo.readout_qubit);
}

/// Central finite differences per parameter, (O(t+e) - O(t-e)) / 2e. The
/// state is advanced once up to each parameter's gate and only the suffix is
/// re-simulated for the two shifted evaluations.
template <class Scalar>
std::vector<double> qcnn_grad_fd(std::span<const Scalar> pixels, const QcnnParams& params,
                                 const CircuitTopology& topo, double epsilon = 1e-4) {
    require(epsilon > 0.0, "qcnn_grad_fd: epsilon must be positive");
    CircuitProgram prog = build_program(topo, params);
    StateVector encoded = amplitude_encode(pixels, topo.n_qubits);
    auto flat = params.flatten();

    // Parameters ordered by gate position so a running prefix state is reused.
    std::vector<std::size_t> order(flat.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return prog.param_position[a] < prog.param_position[b];
    });

    std::vector<double> grad(flat.size(), 0.0);
    StateVector prefix = encoded;
    std::size_t done = 0;  // gates already applied to prefix
    auto shifted = flat;
    for (std::size_t j : order) {
        std::size_t pos = prog.param_position[j];
        for (; done < pos; ++done)
            detail::apply_gate(prefix, prog.gates[done], flat, nullptr, done);
        double vals[2];
        for (int sgn = 0; sgn < 2; ++sgn) {
            shifted[j] = flat[j] + (sgn == 0 ? epsilon : -epsilon);
            StateVector s = prefix;
            for (std::size_t g = pos; g < prog.gates.size(); ++g)
                detail::apply_gate(s, prog.gates[g], shifted, nullptr, g);
            vals[sgn] = pauli_z_expectation(s, prog.readout_qubit);
            shifted[j] = flat[j];
        }
        grad[j] = (vals[0] - vals[1]) / (2.0 * epsilon);
    }
    return grad;
}

/// Exact gradients by the parameter-shift rule. Ry/Rz angles use the
/// two-evaluation +/- pi/2 rule. A pool angle enters its controlled rotation
/// through the half-angle decomposition Ry(a/2) CNOT Ry(-a/2) CNOT, so its
/// gradient is the +/- 1/2-weighted sum of the two slots' shift rules (four
/// evaluations per pool parameter).
template <class Scalar>
std::vector<double> qcnn_grad_shift(std::span<const Scalar> pixels, const QcnnParams& params,
                                    const CircuitTopology& topo) {
    CircuitProgram prog = build_program(topo, params);
    StateVector encoded = amplitude_encode(pixels, topo.n_qubits);
    auto flat = params.flatten();
    constexpr double half_pi = 1.5707963267948966;

    auto eval = [&](const detail::GateShift& shift) {
        StateVector s = run_program(prog, encoded, flat, &shift);
        return pauli_z_expectation(s, prog.readout_qubit);
    };

    std::vector<double> grad(flat.size(), 0.0);
    for (std::size_t j = 0; j < flat.size(); ++j) {
        std::size_t pos = prog.param_position[j];
        const GateInstr& g = prog.gates[pos];
        switch (g.kind) {
            case GateInstr::Kind::Ry:
            case GateInstr::Kind::Rz: {
                double plus = eval({pos, +half_pi, 0});
                double minus = eval({pos, -half_pi, 0});
                grad[j] = 0.5 * (plus - minus);
                break;
            }
            case GateInstr::Kind::DualRy: {
                double acc = 0.0;
                for (int slot = 0; slot < 2; ++slot) {
                    double plus = eval({pos, +half_pi, slot});
                    double minus = eval({pos, -half_pi, slot});
                    double coeff = (slot == 0) ? 0.5 : -0.5;
                    acc += coeff * 0.5 * (plus - minus);
                }
                grad[j] = acc;
                break;
            }
            default:
                throw std::invalid_argument("qcnn_grad_shift: gate family without a shift rule");
        }
    }
    return grad;
}

}  // namespace signet
