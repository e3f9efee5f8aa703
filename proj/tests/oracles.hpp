#pragma once

// Test-side oracles, independent of the library's gradient paths:
// central finite differences over arbitrary scalar functions, and a dense
// 2^n x 2^n matrix simulator for small quantum circuits.

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "signet/qcnn.hpp"
#include "signet/statevector.hpp"
#include "signet/tensor.hpp"

namespace oracle {

/// Central finite difference of f against every element of `values`,
/// perturbing in place. f must not cache state across calls.
template <class T>
std::vector<double> finite_diff(std::vector<T>& values, const std::function<double()>& f,
                                double h = 1e-5) {
    std::vector<double> g(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        T keep = values[i];
        values[i] = static_cast<T>(static_cast<double>(keep) + h);
        double plus = f();
        values[i] = static_cast<T>(static_cast<double>(keep) - h);
        double minus = f();
        values[i] = keep;
        g[i] = (plus - minus) / (2.0 * h);
    }
    return g;
}

/// Largest relative error between an analytic gradient and its oracle,
/// with an absolute floor so near-zero entries compare sanely.
template <class T>
double max_rel_err(const std::vector<T>& analytic, const std::vector<double>& reference,
                   double floor = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        double a = static_cast<double>(analytic[i]);
        double r = reference[i];
        double denom = std::max({std::abs(a), std::abs(r), floor});
        worst = std::max(worst, std::abs(a - r) / denom);
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Dense-matrix circuit simulation for n <= 4 qubits: build the full circuit
// unitary by multiplying explicit gate embeddings, then apply it to the
// encoded state.
// ---------------------------------------------------------------------------

using cplx = signet::cplx;
using Matrix = std::vector<std::vector<cplx>>;

inline Matrix identity(std::size_t dim) {
    Matrix m(dim, std::vector<cplx>(dim, cplx(0, 0)));
    for (std::size_t i = 0; i < dim; ++i) m[i][i] = cplx(1, 0);
    return m;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    std::size_t dim = a.size();
    Matrix out(dim, std::vector<cplx>(dim, cplx(0, 0)));
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t k = 0; k < dim; ++k) {
            cplx v = a[i][k];
            if (v == cplx(0, 0)) continue;
            for (std::size_t j = 0; j < dim; ++j) out[i][j] += v * b[k][j];
        }
    return out;
}

/// Embeds a 2x2 gate acting on `qubit` (1-based, bit qubit-1) into dim x dim.
inline Matrix embed_single(std::size_t n_qubits, int qubit, const std::array<cplx, 4>& u) {
    std::size_t dim = std::size_t(1) << n_qubits;
    std::size_t mask = std::size_t(1) << (qubit - 1);
    Matrix m(dim, std::vector<cplx>(dim, cplx(0, 0)));
    for (std::size_t col = 0; col < dim; ++col) {
        std::size_t bit = (col & mask) ? 1 : 0;
        std::size_t flipped = col ^ mask;
        // column `col` maps to u[.][bit] on rows col (same bit) and flipped.
        m[bit == 0 ? col : flipped][col] += u[0 * 2 + bit];
        m[bit == 0 ? flipped : col][col] += u[1 * 2 + bit];
    }
    return m;
}

inline Matrix embed_controlled(std::size_t n_qubits, int control, int target,
                               const std::array<cplx, 4>& u) {
    std::size_t dim = std::size_t(1) << n_qubits;
    std::size_t cmask = std::size_t(1) << (control - 1);
    std::size_t tmask = std::size_t(1) << (target - 1);
    Matrix m = identity(dim);
    for (std::size_t col = 0; col < dim; ++col) {
        if (!(col & cmask)) continue;
        for (std::size_t i = 0; i < dim; ++i) m[i][col] = cplx(0, 0);
        std::size_t bit = (col & tmask) ? 1 : 0;
        std::size_t flipped = col ^ tmask;
        m[bit == 0 ? col : flipped][col] += u[0 * 2 + bit];
        m[bit == 0 ? flipped : col][col] += u[1 * 2 + bit];
    }
    return m;
}

inline std::array<cplx, 4> ry_matrix(double t) {
    return {cplx(std::cos(t / 2), 0), cplx(-std::sin(t / 2), 0), cplx(std::sin(t / 2), 0),
            cplx(std::cos(t / 2), 0)};
}

inline std::array<cplx, 4> rz_matrix(double t) {
    return {std::polar(1.0, -t / 2), cplx(0, 0), cplx(0, 0), std::polar(1.0, t / 2)};
}

inline Matrix embed_cz(std::size_t n_qubits, int qa, int qb) {
    std::size_t dim = std::size_t(1) << n_qubits;
    std::size_t both = (std::size_t(1) << (qa - 1)) | (std::size_t(1) << (qb - 1));
    Matrix m = identity(dim);
    for (std::size_t i = 0; i < dim; ++i)
        if ((i & both) == both) m[i][i] = cplx(-1, 0);
    return m;
}

/// Full circuit unitary for a topology + params, multiplied gate by gate.
inline Matrix circuit_unitary(const signet::CircuitTopology& topo, const signet::QcnnParams& p) {
    std::size_t dim = std::size_t(1) << topo.n_qubits;
    Matrix u = identity(dim);
    auto push = [&](const Matrix& gate) { u = matmul(gate, u); };
    std::size_t r = 0;
    for (int q : topo.rotation_qubits) {
        push(embed_single(topo.n_qubits, q, ry_matrix(p.rotation[r])));
        push(embed_single(topo.n_qubits, q, rz_matrix(p.rotation[r + 1])));
        r += 2;
    }
    std::size_t c = 0, pl = 0;
    for (std::size_t layer = 0; layer < topo.conv_layers.size(); ++layer) {
        for (auto [a, b] : topo.conv_layers[layer]) {
            push(embed_single(topo.n_qubits, a, ry_matrix(p.conv[c])));
            push(embed_single(topo.n_qubits, b, ry_matrix(p.conv[c + 1])));
            push(embed_cz(topo.n_qubits, a, b));
            c += 2;
        }
        for (auto [discard, keep] : topo.pool_layers[layer]) {
            push(embed_controlled(topo.n_qubits, discard, keep, ry_matrix(p.pool[pl])));
            pl += 1;
        }
    }
    return u;
}

inline std::vector<cplx> apply_matrix(const Matrix& m, const std::vector<cplx>& v) {
    std::vector<cplx> out(v.size(), cplx(0, 0));
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j) out[i] += m[i][j] * v[j];
    return out;
}

}  // namespace oracle
