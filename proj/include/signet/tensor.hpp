#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "signet/common.hpp"

namespace signet {

// ---------------------------------------------------------------------------
// Tensor: a dense row-major n-d array with an optional gradient slot.
// Copies share storage (value-semantic handle), so tensors can sit both in a
// parameter store and on the tape without duplication.
// ---------------------------------------------------------------------------

template <class T>
struct TensorData {
    std::vector<std::size_t> shape;
    std::vector<T> data;
    std::vector<T> grad;  // same length as data once touched
    bool requires_grad = false;
};

template <class T>
class TensorT {
public:
    TensorT() = default;

    static TensorT zeros(std::vector<std::size_t> shape) {
        TensorT t;
        t.d_ = std::make_shared<TensorData<T>>();
        t.d_->shape = std::move(shape);
        t.d_->data.assign(shape_size(t.d_->shape), T(0));
        return t;
    }

    static TensorT full(std::vector<std::size_t> shape, T value) {
        TensorT t = zeros(std::move(shape));
        std::fill(t.data().begin(), t.data().end(), value);
        return t;
    }

    static TensorT scalar(T value) { return full({1}, value); }

    static TensorT from(std::vector<std::size_t> shape, std::vector<T> values) {
        require(shape_size(shape) == values.size(),
                "tensor: " + std::to_string(values.size()) + " values do not fill shape " + shape_str(shape));
        TensorT t;
        t.d_ = std::make_shared<TensorData<T>>();
        t.d_->shape = std::move(shape);
        t.d_->data = std::move(values);
        return t;
    }

    bool defined() const { return static_cast<bool>(d_); }
    const std::vector<std::size_t>& shape() const { return d_->shape; }
    std::size_t size() const { return d_->data.size(); }
    std::size_t dim(std::size_t i) const { return d_->shape[i]; }
    std::size_t ndim() const { return d_->shape.size(); }

    std::vector<T>& data() { return d_->data; }
    const std::vector<T>& data() const { return d_->data; }
    T& at(std::size_t i) { return d_->data[i]; }
    T at(std::size_t i) const { return d_->data[i]; }

    /// Scalar value of a one-element tensor.
    T item() const {
        require(size() == 1, "item: tensor has " + std::to_string(size()) + " elements, expected 1");
        return d_->data[0];
    }

    bool requires_grad() const { return d_ && d_->requires_grad; }
    void set_requires_grad(bool v) { d_->requires_grad = v; }

    std::vector<T>& grad() {
        if (d_->grad.size() != d_->data.size()) d_->grad.assign(d_->data.size(), T(0));
        return d_->grad;
    }
    const std::vector<T>& grad() const { return d_->grad; }
    bool has_grad() const { return d_ && d_->grad.size() == d_->data.size(); }
    void zero_grad() { d_->grad.assign(d_->data.size(), T(0)); }

    TensorData<T>* node() const { return d_.get(); }
    bool same_storage(const TensorT& o) const { return d_ == o.d_; }

    /// Deep copy; the clone starts with no gradient and no tape history.
    TensorT clone() const {
        TensorT t = zeros(d_->shape);
        t.data() = d_->data;
        t.d_->requires_grad = d_->requires_grad;
        return t;
    }

private:
    std::shared_ptr<TensorData<T>> d_;
};

using Tensor = TensorT<float>;

template <class T>
struct TapeT;
using Tape = TapeT<float>;

// ---------------------------------------------------------------------------
// Tape: ordered record of primitive operations, replayed in reverse by
// backward(). Backward closures are themselves written against primitive ops;
// when a backward pass runs with create_graph the closures record onto the
// same tape, which is what makes the WGAN-GP double backward exact.
// ---------------------------------------------------------------------------

template <class T>
struct TapeT {
    struct Entry {
        TensorData<T>* out;
        TensorT<T> out_ref;                  // keeps the result alive
        std::vector<TensorT<T>> inputs;      // operands, aligned with backward's result
        std::function<std::vector<TensorT<T>>(const TensorT<T>& gout)> backward;
    };
    std::vector<Entry> entries;
};

namespace detail {

template <class T>
struct TapeState {
    TapeT<T>* tape = nullptr;
    bool grad_enabled = true;
};

template <class T>
TapeState<T>& tape_state() {
    thread_local TapeState<T> s;
    return s;
}

}  // namespace detail

/// Makes a tape the active recording target on this thread for its lifetime.
template <class T>
class TapeScope {
public:
    explicit TapeScope(TapeT<T>& tape) : prev_(detail::tape_state<T>().tape) {
        detail::tape_state<T>().tape = &tape;
    }
    ~TapeScope() { detail::tape_state<T>().tape = prev_; }
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    TapeT<T>* prev_;
};

/// Disables recording for its lifetime (forward values still computed).
template <class T>
class NoGradScope {
public:
    NoGradScope() : prev_(detail::tape_state<T>().grad_enabled) {
        detail::tape_state<T>().grad_enabled = false;
    }
    ~NoGradScope() { detail::tape_state<T>().grad_enabled = prev_; }
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

private:
    bool prev_;
};

namespace detail {

template <class T>
bool recording() {
    auto& s = tape_state<T>();
    return s.tape != nullptr && s.grad_enabled;
}

template <class T>
bool any_requires_grad(std::initializer_list<const TensorT<T>*> ins) {
    for (const auto* t : ins)
        if (t->requires_grad()) return true;
    return false;
}

/// Records one primitive op if grad flow is active. The closure receives the
/// upstream gradient and returns per-input gradients (undefined Tensor for
/// inputs that need none).
template <class T, class Fn>
void record(TensorT<T>& out, std::vector<TensorT<T>> inputs, Fn&& fn) {
    if (!recording<T>()) return;
    bool needed = false;
    for (const auto& in : inputs)
        if (in.requires_grad()) needed = true;
    if (!needed) return;
    out.set_requires_grad(true);
    auto& tape = *tape_state<T>().tape;
    tape.entries.push_back({out.node(), out, std::move(inputs), std::forward<Fn>(fn)});
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Primitive ops. Each op computes its value eagerly and registers a backward
// closure composed of other primitives, so gradients of gradients work for
// the whole family below.
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
    require(a.shape() == b.shape(),
            "add: shape " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    TensorT<T> out = TensorT<T>::zeros(a.shape());
    const auto& av = a.data();
    const auto& bv = b.data();
    auto& ov = out.data();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
    detail::record<T>(out, {a, b}, [](const TensorT<T>& g) {
        return std::vector<TensorT<T>>{g, g};
    });
    return out;
}

template <class T>
TensorT<T> scale(const TensorT<T>& a, T c) {
    TensorT<T> out = TensorT<T>::zeros(a.shape());
    const auto& av = a.data();
    auto& ov = out.data();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * c;
    detail::record<T>(out, {a}, [c](const TensorT<T>& g) {
        return std::vector<TensorT<T>>{scale(g, c)};
    });
    return out;
}

template <class T>
TensorT<T> neg(const TensorT<T>& a) { return scale(a, T(-1)); }

template <class T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
    require(a.shape() == b.shape(),
            "sub: shape " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    TensorT<T> out = TensorT<T>::zeros(a.shape());
    const auto& av = a.data();
    const auto& bv = b.data();
    auto& ov = out.data();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i];
    detail::record<T>(out, {a, b}, [](const TensorT<T>& g) {
        return std::vector<TensorT<T>>{g, neg(g)};
    });
    return out;
}

template <class T>
TensorT<T> add_scalar(const TensorT<T>& a, T c) {
    TensorT<T> out = TensorT<T>::zeros(a.shape());
    const auto& av = a.data();
    auto& ov = out.data();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + c;
    detail::record<T>(out, {a}, [](const TensorT<T>& g) {
        return std::vector<TensorT<T>>{g};
    });
    return out;
}

template <class T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
    require(a.shape() == b.shape(),
            "mul: shape " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    TensorT<T> out = TensorT<T>::zeros(a.shape());
    const auto& av = a.data();
    const auto& bv = b.data();
    auto& ov = out.data();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
    detail::record<T>(out, {a, b}, [a, b](const TensorT<T>& g) {
        return std::vector<TensorT<T>>{mul(g, b), mul(g, a)};
    });
    return out;
}

template <class T>
TensorT<T> square(const TensorT<T>& a) {
    TensorT<T> out = TensorT<T>::zeros(a.shape());
    const auto& av = a.data();
    auto& ov = out.data();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * av[i];
    detail::record<T>(out, {a}, [a](const TensorT<T>& g) {
        return std::vector<TensorT<T>>{mul(g, scale(a, T(2)))};
    });
    return out;
}

template <class T>
TensorT<T> reciprocal(const TensorT<T>& a) {
    TensorT<T> out = TensorT<T>::zeros(a.shape());
    const auto& av = a.data();
    auto& ov = out.data();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = T(1) / av[i];
    detail::record<T>(out, {a}, [out](const TensorT<T>& g) {
        // d(1/a)/da = -1/a^2 = -out^2
        return std::vector<TensorT<T>>{neg(mul(g, square(out)))};
    });
    return out;
}

template <class T>
TensorT<T> log_t(const TensorT<T>& a) {
    TensorT<T> out = TensorT<T>::zeros(a.shape());
    const auto& av = a.data();
    auto& ov = out.data();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = std::log(av[i]);
    detail::record<T>(out, {a}, [a](const TensorT<T>& g) {
        return std::vector<TensorT<T>>{mul(g, reciprocal(a))};
    });
    return out;
}

template <class T>
TensorT<T> sqrt_t(const TensorT<T>& a) {
    TensorT<T> out = TensorT<T>::zeros(a.shape());
    const auto& av = a.data();
    auto& ov = out.data();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = std::sqrt(av[i]);
    detail::record<T>(out, {a}, [out](const TensorT<T>& g) {
        return std::vector<TensorT<T>>{mul(g, scale(reciprocal(out), T(0.5)))};
    });
    return out;
}

template <class T>
TensorT<T> sum(const TensorT<T>& a);

/// Fills a tensor of the given shape with the scalar's value.
template <class T>
TensorT<T> broadcast_scalar(const TensorT<T>& s, std::vector<std::size_t> shape) {
    require(s.size() == 1, "broadcast_scalar: source has " + std::to_string(s.size()) + " elements");
    TensorT<T> out = TensorT<T>::full(std::move(shape), s.item());
    detail::record<T>(out, {s}, [](const TensorT<T>& g) {
        return std::vector<TensorT<T>>{sum(g)};
    });
    return out;
}

template <class T>
TensorT<T> sum(const TensorT<T>& a) {
    double acc = 0.0;
    for (T v : a.data()) acc += static_cast<double>(v);
    TensorT<T> out = TensorT<T>::scalar(static_cast<T>(acc));
    auto shape = a.shape();
    detail::record<T>(out, {a}, [shape](const TensorT<T>& g) {
        return std::vector<TensorT<T>>{broadcast_scalar(g, shape)};
    });
    return out;
}

template <class T>
TensorT<T> mean(const TensorT<T>& a) {
    return scale(sum(a), T(1) / static_cast<T>(a.size()));
}

template <class T>
TensorT<T> repeat_rows(const TensorT<T>& v, std::size_t rows);

/// Column sums of an N x M matrix -> length-M vector.
template <class T>
TensorT<T> col_sums(const TensorT<T>& a) {
    require(a.ndim() == 2, "col_sums: expected rank 2, got " + shape_str(a.shape()));
    std::size_t n = a.dim(0), m = a.dim(1);
    TensorT<T> out = TensorT<T>::zeros({m});
    std::vector<double> acc(m, 0.0);
    const auto& av = a.data();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) acc[j] += static_cast<double>(av[i * m + j]);
    for (std::size_t j = 0; j < m; ++j) out.at(j) = static_cast<T>(acc[j]);
    detail::record<T>(out, {a}, [n](const TensorT<T>& g) {
        return std::vector<TensorT<T>>{repeat_rows(g, n)};
    });
    return out;
}

/// Stacks a length-M vector into N identical rows.
template <class T>
TensorT<T> repeat_rows(const TensorT<T>& v, std::size_t rows) {
    require(v.ndim() == 1, "repeat_rows: expected rank 1, got " + shape_str(v.shape()));
    std::size_t m = v.dim(0);
    TensorT<T> out = TensorT<T>::zeros({rows, m});
    const auto& vv = v.data();
    auto& ov = out.data();
    for (std::size_t i = 0; i < rows; ++i)
        std::copy(vv.begin(), vv.end(), ov.begin() + i * m);
    detail::record<T>(out, {v}, [](const TensorT<T>& g) {
        return std::vector<TensorT<T>>{col_sums(g)};
    });
    return out;
}

template <class T>
TensorT<T> broadcast_rows(const TensorT<T>& col, std::size_t cols);

/// Row sums of an N x M matrix -> length-N vector (per-sample reduction).
template <class T>
TensorT<T> row_sums(const TensorT<T>& a) {
    require(a.ndim() == 2, "row_sums: expected rank 2, got " + shape_str(a.shape()));
    std::size_t n = a.dim(0), m = a.dim(1);
    TensorT<T> out = TensorT<T>::zeros({n});
    const auto& av = a.data();
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) acc += static_cast<double>(av[i * m + j]);
        out.at(i) = static_cast<T>(acc);
    }
    detail::record<T>(out, {a}, [m](const TensorT<T>& g) {
        return std::vector<TensorT<T>>{broadcast_rows(g, m)};
    });
    return out;
}

/// Spreads a length-N vector across M columns.
template <class T>
TensorT<T> broadcast_rows(const TensorT<T>& col, std::size_t cols) {
    require(col.ndim() == 1, "broadcast_rows: expected rank 1, got " + shape_str(col.shape()));
    std::size_t n = col.dim(0);
    TensorT<T> out = TensorT<T>::zeros({n, cols});
    const auto& cv = col.data();
    auto& ov = out.data();
    for (std::size_t i = 0; i < n; ++i)
        std::fill(ov.begin() + i * cols, ov.begin() + (i + 1) * cols, cv[i]);
    detail::record<T>(out, {col}, [](const TensorT<T>& g) {
        return std::vector<TensorT<T>>{row_sums(g)};
    });
    return out;
}

template <class T>
TensorT<T> transpose(const TensorT<T>& a) {
    require(a.ndim() == 2, "transpose: expected rank 2, got " + shape_str(a.shape()));
    std::size_t n = a.dim(0), m = a.dim(1);
    TensorT<T> out = TensorT<T>::zeros({m, n});
    const auto& av = a.data();
    auto& ov = out.data();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) ov[j * n + i] = av[i * m + j];
    detail::record<T>(out, {a}, [](const TensorT<T>& g) {
        return std::vector<TensorT<T>>{transpose(g)};
    });
    return out;
}

template <class T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
    require(a.ndim() == 2 && b.ndim() == 2,
            "matmul: expected rank-2 operands, got " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    require(a.dim(1) == b.dim(0),
            "matmul: inner dimensions disagree (" + std::to_string(a.dim(1)) + " vs " + std::to_string(b.dim(0)) + ")");
    std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
    TensorT<T> out = TensorT<T>::zeros({n, m});
    const auto& av = a.data();
    const auto& bv = b.data();
    auto& ov = out.data();
    std::vector<double> row(m);
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(row.begin(), row.end(), 0.0);
        for (std::size_t p = 0; p < k; ++p) {
            double aval = static_cast<double>(av[i * k + p]);
            const T* brow = bv.data() + p * m;
            for (std::size_t j = 0; j < m; ++j) row[j] += aval * static_cast<double>(brow[j]);
        }
        for (std::size_t j = 0; j < m; ++j) ov[i * m + j] = static_cast<T>(row[j]);
    }
    detail::record<T>(out, {a, b}, [a, b](const TensorT<T>& g) {
        return std::vector<TensorT<T>>{matmul(g, transpose(b)), matmul(transpose(a), g)};
    });
    return out;
}

template <class T>
TensorT<T> reshape(const TensorT<T>& a, std::vector<std::size_t> shape) {
    require(shape_size(shape) == a.size(),
            "reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    TensorT<T> out = TensorT<T>::zeros(shape);
    out.data() = a.data();
    auto orig = a.shape();
    detail::record<T>(out, {a}, [orig](const TensorT<T>& g) {
        return std::vector<TensorT<T>>{reshape(g, orig)};
    });
    return out;
}

// ---------------------------------------------------------------------------
// Reverse-mode traversal.
// ---------------------------------------------------------------------------

namespace detail {

/// Shared reverse walk. Seeds the root with ones, walks entries from the
/// root's position down to the start, and returns the gradient attached to
/// every node encountered. When create_graph is set the accumulation itself
/// records onto the active tape.
template <class T>
std::unordered_map<TensorData<T>*, TensorT<T>> reverse_walk(TapeT<T>& tape,
                                                            const TensorT<T>& root,
                                                            bool create_graph) {
    require(root.size() == 1, "backward: root must be a scalar, got shape " + shape_str(root.shape()));
    std::unordered_map<TensorData<T>*, TensorT<T>> grads;
    grads[root.node()] = TensorT<T>::scalar(T(1));

    std::size_t start = 0;
    bool on_tape = false;
    for (std::size_t i = tape.entries.size(); i-- > 0;) {
        if (tape.entries[i].out == root.node()) {
            start = i + 1;
            on_tape = true;
            break;
        }
    }
    if (!on_tape) return grads;  // leaf root: empty walk is a no-op

    // With create_graph the closures record new entries onto this same tape;
    // they land past `start` and are never revisited by this walk. Entries
    // are copied out before invocation because push_back may reallocate.
    std::optional<TapeScope<T>> scope;
    if (create_graph) scope.emplace(tape);

    for (std::size_t idx = start; idx-- > 0;) {
        auto it = grads.find(tape.entries[idx].out);
        if (it == grads.end()) continue;
        TensorT<T> gout = it->second;
        auto backward_fn = tape.entries[idx].backward;
        auto inputs = tape.entries[idx].inputs;
        std::vector<TensorT<T>> gins;
        if (create_graph) {
            gins = backward_fn(gout);
        } else {
            NoGradScope<T> guard;
            gins = backward_fn(gout);
        }
        require(gins.size() == inputs.size(), "backward: closure arity mismatch");
        for (std::size_t j = 0; j < gins.size(); ++j) {
            if (!gins[j].defined()) continue;
            auto* node = inputs[j].node();
            auto g_it = grads.find(node);
            if (g_it == grads.end()) {
                grads.emplace(node, gins[j]);
            } else if (create_graph) {
                g_it->second = add(g_it->second, gins[j]);
            } else {
                NoGradScope<T> guard;
                g_it->second = add(g_it->second, gins[j]);
            }
        }
    }
    return grads;
}

}  // namespace detail

/// Accumulates reverse-mode gradients of a scalar loss into the .grad slot of
/// every tensor with requires_grad reachable on the tape. Repeated calls add.
template <class T>
void backward(TapeT<T>& tape, const TensorT<T>& loss) {
    auto grads = detail::reverse_walk(tape, loss, /*create_graph=*/false);
    for (auto& [node, g] : grads) {
        if (!node->requires_grad) continue;
        if (node->grad.size() != node->data.size()) node->grad.assign(node->data.size(), T(0));
        const auto& gv = g.data();
        for (std::size_t i = 0; i < gv.size(); ++i) node->grad[i] += gv[i];
    }
}

/// Returns d(loss)/d(wrt[i]) as tensors without touching any .grad slot.
/// With create_graph the returned tensors stay differentiable, which is the
/// hook for gradient-of-gradient terms.
template <class T>
std::vector<TensorT<T>> grad_of(TapeT<T>& tape, const TensorT<T>& loss,
                                const std::vector<TensorT<T>>& wrt, bool create_graph) {
    auto grads = detail::reverse_walk(tape, loss, create_graph);
    std::vector<TensorT<T>> out;
    out.reserve(wrt.size());
    for (const auto& w : wrt) {
        auto it = grads.find(w.node());
        if (it == grads.end()) {
            out.push_back(TensorT<T>::zeros(w.shape()));
        } else {
            out.push_back(it->second);
        }
    }
    return out;
}

}  // namespace signet
