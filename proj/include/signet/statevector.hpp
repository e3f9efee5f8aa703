#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "signet/common.hpp"

namespace signet {

// ---------------------------------------------------------------------------
// Exact statevector simulation. Convention: qubit k (1-based) corresponds to
// bit (k-1) of the basis index, so qubit 1 is the least significant bit.
// Amplitudes are double-precision complex throughout.
// ---------------------------------------------------------------------------

using cplx = std::complex<double>;

struct StateVector {
    int n_qubits = 12;
    std::vector<cplx> amps;

    static StateVector basis(int n_qubits, std::size_t index) {
        require(n_qubits >= 1 && n_qubits <= 24, "statevector: qubit count out of range");
        StateVector s;
        s.n_qubits = n_qubits;
        s.amps.assign(std::size_t(1) << n_qubits, cplx(0.0, 0.0));
        require(index < s.amps.size(), "statevector: basis index out of range");
        s.amps[index] = cplx(1.0, 0.0);
        return s;
    }

    std::size_t dim() const { return amps.size(); }

    double norm_sq() const {
        double acc = 0.0;
        for (const cplx& a : amps) acc += std::norm(a);
        return acc;
    }
};

namespace detail {

inline void check_qubit(const StateVector& s, int qubit, const char* op) {
    require(qubit >= 1 && qubit <= s.n_qubits,
            std::string(op) + ": qubit " + std::to_string(qubit) + " out of range [1," +
                std::to_string(s.n_qubits) + "]");
}

}  // namespace detail

namespace detail {

/// Rotates target pairs (i, i+tmask) by the 2x2 real matrix [[c,-sn],[sn,c]]
/// over every index in [begin, end) with the target bit clear. Pair indices
/// are walked block-wise so the inner loop is contiguous.
inline void rotate_pairs_real(cplx* amps, std::size_t begin, std::size_t end, std::size_t tmask,
                              double c, double sn) {
    for (std::size_t base = begin; base < end; base += 2 * tmask) {
        cplx* a = amps + base;
        cplx* b = a + tmask;
        for (std::size_t i = 0; i < tmask; ++i) {
            cplx va = a[i], vb = b[i];
            a[i] = c * va - sn * vb;
            b[i] = sn * va + c * vb;
        }
    }
}

}  // namespace detail

/// Applies a 2x2 matrix {u00,u01,u10,u11} to one qubit.
inline void apply_single_qubit(StateVector& s, int qubit, const std::array<cplx, 4>& u) {
    detail::check_qubit(s, qubit, "apply_single_qubit");
    const std::size_t mask = std::size_t(1) << (qubit - 1);
    const std::size_t n = s.dim();
    for (std::size_t base = 0; base < n; base += 2 * mask) {
        cplx* a = s.amps.data() + base;
        cplx* b = a + mask;
        for (std::size_t i = 0; i < mask; ++i) {
            cplx va = a[i], vb = b[i];
            a[i] = u[0] * va + u[1] * vb;
            b[i] = u[2] * va + u[3] * vb;
        }
    }
}

/// Ry(theta) = [[cos t/2, -sin t/2], [sin t/2, cos t/2]]. Real entries, so
/// the update touches re/im independently.
inline void apply_ry(StateVector& s, int qubit, double theta) {
    detail::check_qubit(s, qubit, "apply_ry");
    const std::size_t mask = std::size_t(1) << (qubit - 1);
    detail::rotate_pairs_real(s.amps.data(), 0, s.dim(), mask, std::cos(theta / 2.0),
                              std::sin(theta / 2.0));
}

/// Rz(theta) = diag(e^{-i theta/2}, e^{+i theta/2}).
inline void apply_rz(StateVector& s, int qubit, double theta) {
    detail::check_qubit(s, qubit, "apply_rz");
    const cplx e0 = std::polar(1.0, -theta / 2.0);
    const cplx e1 = std::polar(1.0, theta / 2.0);
    const std::size_t mask = std::size_t(1) << (qubit - 1);
    const std::size_t n = s.dim();
    for (std::size_t base = 0; base < n; base += 2 * mask) {
        cplx* a = s.amps.data() + base;
        for (std::size_t i = 0; i < mask; ++i) {
            a[i] *= e0;
            a[i + mask] *= e1;
        }
    }
}

inline void apply_cz(StateVector& s, int qa, int qb) {
    detail::check_qubit(s, qa, "apply_cz");
    detail::check_qubit(s, qb, "apply_cz");
    require(qa != qb, "apply_cz: qubits must differ");
    const std::size_t hi = std::size_t(1) << (std::max(qa, qb) - 1);
    const std::size_t lo = std::size_t(1) << (std::min(qa, qb) - 1);
    const std::size_t n = s.dim();
    for (std::size_t h = hi; h < n; h += 2 * hi)
        for (std::size_t l = lo; l < hi; l += 2 * lo) {
            cplx* a = s.amps.data() + h + l;
            for (std::size_t i = 0; i < lo; ++i) a[i] = -a[i];
        }
}

inline void apply_cnot(StateVector& s, int control, int target) {
    detail::check_qubit(s, control, "apply_cnot");
    detail::check_qubit(s, target, "apply_cnot");
    require(control != target, "apply_cnot: qubits must differ");
    const std::size_t cmask = std::size_t(1) << (control - 1);
    const std::size_t tmask = std::size_t(1) << (target - 1);
    const std::size_t n = s.dim();
    if (cmask > tmask) {
        for (std::size_t cb = cmask; cb < n; cb += 2 * cmask)
            for (std::size_t tb = 0; tb < cmask; tb += 2 * tmask) {
                cplx* a = s.amps.data() + cb + tb;
                for (std::size_t i = 0; i < tmask; ++i) std::swap(a[i], a[i + tmask]);
            }
    } else {
        for (std::size_t tb = 0; tb < n; tb += 2 * tmask)
            for (std::size_t cb = cmask; cb < tmask; cb += 2 * cmask) {
                cplx* a = s.amps.data() + tb + cb;
                for (std::size_t i = 0; i < cmask; ++i) std::swap(a[i], a[i + tmask]);
            }
    }
}

/// Branch-selected Ry on the target: rotates by angle0 where the control
/// qubit is |0> and by angle1 where it is |1>. With angle0 = 0 this is the
/// standard controlled-Ry; the two-angle form also covers the shifted
/// circuits of the parameter-shift rule for controlled rotations.
inline void apply_dual_ry(StateVector& s, int control, int target, double angle0, double angle1) {
    detail::check_qubit(s, control, "apply_dual_ry");
    detail::check_qubit(s, target, "apply_dual_ry");
    require(control != target, "apply_dual_ry: qubits must differ");
    const double c0 = std::cos(angle0 / 2.0), s0 = std::sin(angle0 / 2.0);
    const double c1 = std::cos(angle1 / 2.0), s1 = std::sin(angle1 / 2.0);
    const std::size_t cmask = std::size_t(1) << (control - 1);
    const std::size_t tmask = std::size_t(1) << (target - 1);
    const std::size_t n = s.dim();
    if (cmask > tmask) {
        for (std::size_t cb = 0; cb < n; cb += cmask) {
            bool on = (cb & cmask) != 0;
            if (on)
                detail::rotate_pairs_real(s.amps.data(), cb, cb + cmask, tmask, c1, s1);
            else if (angle0 != 0.0)
                detail::rotate_pairs_real(s.amps.data(), cb, cb + cmask, tmask, c0, s0);
        }
    } else {
        for (std::size_t tb = 0; tb < n; tb += 2 * tmask) {
            cplx* a = s.amps.data() + tb;
            for (std::size_t cb = 0; cb < tmask; cb += cmask) {
                bool on = (cb & cmask) != 0;
                double c = on ? c1 : c0, sn = on ? s1 : s0;
                if (!on && angle0 == 0.0) continue;
                for (std::size_t i = cb; i < cb + cmask; ++i) {
                    cplx va = a[i], vb = a[i + tmask];
                    a[i] = c * va - sn * vb;
                    a[i + tmask] = sn * va + c * vb;
                }
            }
        }
    }
}

inline void apply_cry(StateVector& s, int control, int target, double theta) {
    apply_dual_ry(s, control, target, 0.0, theta);
}

/// Applies an arbitrary two-qubit gate given as a 4x4 row-major matrix over
/// the basis |qb qa> (qa the low bit). Rejects non-unitary matrices.
inline void apply_two_qubit(StateVector& s, const std::array<cplx, 16>& u, int qa, int qb) {
    detail::check_qubit(s, qa, "apply_two_qubit");
    detail::check_qubit(s, qb, "apply_two_qubit");
    require(qa != qb, "apply_two_qubit: qubit indices must differ");
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
            cplx dot(0.0, 0.0);
            for (int k = 0; k < 4; ++k) dot += std::conj(u[k * 4 + r]) * u[k * 4 + c];
            double expect = (r == c) ? 1.0 : 0.0;
            require(std::abs(dot - cplx(expect, 0.0)) <= 1e-10,
                    "apply_two_qubit: matrix is not unitary within 1e-10");
        }
    const std::size_t ma = std::size_t(1) << (qa - 1);
    const std::size_t mb = std::size_t(1) << (qb - 1);
    const std::size_t n = s.dim();
    for (std::size_t i = 0; i < n; ++i) {
        if (i & (ma | mb)) continue;
        std::array<std::size_t, 4> idx = {i, i | ma, i | mb, i | ma | mb};
        std::array<cplx, 4> v;
        for (int k = 0; k < 4; ++k) v[k] = s.amps[idx[k]];
        for (int r = 0; r < 4; ++r) {
            cplx acc(0.0, 0.0);
            for (int c = 0; c < 4; ++c) acc += u[r * 4 + c] * v[c];
            s.amps[idx[r]] = acc;
        }
    }
}

/// Amplitude encoding: amplitude i = x_i / ||x||_2 for i < len(x), zero for
/// the padding indices up to 2^n. Rejects the all-zero input.
template <class Scalar>
StateVector amplitude_encode(std::span<const Scalar> pixels, int n_qubits) {
    const std::size_t dim = std::size_t(1) << n_qubits;
    require(pixels.size() <= dim, "amplitude_encode: " + std::to_string(pixels.size()) +
                                      " values exceed 2^" + std::to_string(n_qubits) + " amplitudes");
    double norm_sq = 0.0;
    for (Scalar v : pixels) norm_sq += static_cast<double>(v) * static_cast<double>(v);
    require(norm_sq > 0.0, "amplitude_encode: all-zero input has no normalization");
    const double inv = 1.0 / std::sqrt(norm_sq);
    StateVector s;
    s.n_qubits = n_qubits;
    s.amps.assign(dim, cplx(0.0, 0.0));
    for (std::size_t i = 0; i < pixels.size(); ++i)
        s.amps[i] = cplx(static_cast<double>(pixels[i]) * inv, 0.0);
    return s;
}

/// <psi| Z_q |psi>: probability-weighted +/-1 by qubit q's basis bit.
inline double pauli_z_expectation(const StateVector& s, int qubit) {
    detail::check_qubit(s, qubit, "pauli_z_expectation");
    const std::size_t mask = std::size_t(1) << (qubit - 1);
    double acc = 0.0;
    const std::size_t n = s.dim();
    for (std::size_t i = 0; i < n; ++i) {
        double p = std::norm(s.amps[i]);
        acc += (i & mask) ? -p : p;
    }
    return acc;
}

/// Marginal probability of qubit q being |1>.
inline double marginal_one(const StateVector& s, int qubit) {
    detail::check_qubit(s, qubit, "marginal_one");
    const std::size_t mask = std::size_t(1) << (qubit - 1);
    double acc = 0.0;
    for (std::size_t i = 0; i < s.dim(); ++i)
        if (i & mask) acc += std::norm(s.amps[i]);
    return acc;
}

}  // namespace signet
