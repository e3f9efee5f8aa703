#pragma once

#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "signet/common.hpp"
#include "signet/layers.hpp"
#include "signet/params.hpp"
#include "signet/qcnn.hpp"
#include "signet/rng.hpp"
#include "signet/tensor.hpp"

namespace signet {

// ---------------------------------------------------------------------------
// Declarative layer list plus flat parameter store. A model is its spec and
// a ParamStore whose names follow the spec's layer names.
// ---------------------------------------------------------------------------

struct LayerSpec {
    enum class Kind {
        Conv,
        ConvTranspose,
        BatchNorm,
        Relu,
        LeakyRelu,
        Tanh,
        Sigmoid,
        MaxPool,
        PoolTo1,
        Dropout,
        Flatten,
        Reshape,
        Linear,
        Residual,
    };
    enum class Init { He, Xavier };

    Kind kind;
    std::string name;                     // parameter name prefix
    std::size_t in_ch = 0, out_ch = 0;    // conv / linear extents
    std::size_t kernel = 3;
    ConvGeom geom{1, 1};
    double rate = 0.2;                    // dropout rate
    std::vector<std::size_t> dims;        // reshape target (C, H, W)
    Init init = Init::He;
    std::vector<LayerSpec> body;          // residual branch

    static LayerSpec conv(std::string name, std::size_t in, std::size_t out, std::size_t k = 3,
                          ConvGeom g = {1, 1}, Init init = Init::He) {
        LayerSpec l{Kind::Conv, std::move(name)};
        l.in_ch = in;
        l.out_ch = out;
        l.kernel = k;
        l.geom = g;
        l.init = init;
        return l;
    }
    static LayerSpec conv_transpose(std::string name, std::size_t in, std::size_t out, std::size_t k,
                                    ConvGeom g, Init init = Init::He) {
        LayerSpec l{Kind::ConvTranspose, std::move(name)};
        l.in_ch = in;
        l.out_ch = out;
        l.kernel = k;
        l.geom = g;
        l.init = init;
        return l;
    }
    static LayerSpec batchnorm(std::string name, std::size_t channels) {
        LayerSpec l{Kind::BatchNorm, std::move(name)};
        l.out_ch = channels;
        return l;
    }
    static LayerSpec linear(std::string name, std::size_t in, std::size_t out,
                            Init init = Init::Xavier) {
        LayerSpec l{Kind::Linear, std::move(name)};
        l.in_ch = in;
        l.out_ch = out;
        l.init = init;
        return l;
    }
    static LayerSpec act(Kind k) { return LayerSpec{k, ""}; }
    static LayerSpec maxpool() { return LayerSpec{Kind::MaxPool, ""}; }
    static LayerSpec pool_to_1() { return LayerSpec{Kind::PoolTo1, ""}; }
    static LayerSpec dropout(double rate) {
        LayerSpec l{Kind::Dropout, ""};
        l.rate = rate;
        return l;
    }
    static LayerSpec flatten() { return LayerSpec{Kind::Flatten, ""}; }
    static LayerSpec reshape(std::vector<std::size_t> chw) {
        LayerSpec l{Kind::Reshape, ""};
        l.dims = std::move(chw);
        return l;
    }
    static LayerSpec residual(std::string name, std::vector<LayerSpec> body) {
        LayerSpec l{Kind::Residual, std::move(name)};
        l.body = std::move(body);
        return l;
    }
};

struct ModelSpec {
    std::string name;
    std::vector<LayerSpec> layers;
};

namespace detail {

inline void register_layer_params(const LayerSpec& l, ParamStore& store, Rng& rng) {
    switch (l.kind) {
        case LayerSpec::Kind::Conv: {
            std::size_t fan_in = l.in_ch * l.kernel * l.kernel;
            std::size_t fan_out = l.out_ch * l.kernel * l.kernel;
            Tensor w = l.init == LayerSpec::Init::He
                           ? he_uniform({l.out_ch, l.in_ch, l.kernel, l.kernel}, fan_in, rng)
                           : xavier_uniform({l.out_ch, l.in_ch, l.kernel, l.kernel}, fan_in, fan_out, rng);
            store.add(l.name + ".w", std::move(w));
            store.add(l.name + ".b", Tensor::zeros({l.out_ch}));
            break;
        }
        case LayerSpec::Kind::ConvTranspose: {
            std::size_t fan_in = l.in_ch * l.kernel * l.kernel;
            std::size_t fan_out = l.out_ch * l.kernel * l.kernel;
            Tensor w = l.init == LayerSpec::Init::He
                           ? he_uniform({l.in_ch, l.out_ch, l.kernel, l.kernel}, fan_in, rng)
                           : xavier_uniform({l.in_ch, l.out_ch, l.kernel, l.kernel}, fan_in, fan_out, rng);
            store.add(l.name + ".w", std::move(w));
            store.add(l.name + ".b", Tensor::zeros({l.out_ch}));
            break;
        }
        case LayerSpec::Kind::BatchNorm:
            store.add(l.name + ".gamma", Tensor::full({l.out_ch}, 1.0f));
            store.add(l.name + ".beta", Tensor::zeros({l.out_ch}));
            store.add(l.name + ".running_mean", Tensor::zeros({l.out_ch}), /*trainable=*/false);
            store.add(l.name + ".running_var", Tensor::full({l.out_ch}, 1.0f), /*trainable=*/false);
            break;
        case LayerSpec::Kind::Linear: {
            Tensor w = l.init == LayerSpec::Init::He
                           ? he_uniform({l.in_ch, l.out_ch}, l.in_ch, rng)
                           : xavier_uniform({l.in_ch, l.out_ch}, l.in_ch, l.out_ch, rng);
            store.add(l.name + ".w", std::move(w));
            store.add(l.name + ".b", Tensor::zeros({l.out_ch}));
            break;
        }
        case LayerSpec::Kind::Residual:
            for (const auto& sub : l.body) register_layer_params(sub, store, rng);
            break;
        default:
            break;
    }
}

inline Tensor forward_layers(const std::vector<LayerSpec>& layers, ParamStore& store, Tensor x,
                             Mode mode, Rng* dropout_rng);

inline Tensor forward_layer(const LayerSpec& l, ParamStore& store, Tensor x, Mode mode,
                            Rng* dropout_rng) {
    switch (l.kind) {
        case LayerSpec::Kind::Conv:
            return conv2d_g(x, store.get(l.name + ".w"), store.get(l.name + ".b"), l.geom);
        case LayerSpec::Kind::ConvTranspose:
            return conv_transpose2d(x, store.get(l.name + ".w"), store.get(l.name + ".b"), l.geom);
        case LayerSpec::Kind::BatchNorm: {
            BatchNormState bn;
            bn.gamma = store.get(l.name + ".gamma");
            bn.beta = store.get(l.name + ".beta");
            bn.running_mean = store.get(l.name + ".running_mean");
            bn.running_var = store.get(l.name + ".running_var");
            bn.mode = mode;
            return batchnorm2d(x, bn);
        }
        case LayerSpec::Kind::Relu:
            return relu(x);
        case LayerSpec::Kind::LeakyRelu:
            return leaky_relu(x, 0.2f);
        case LayerSpec::Kind::Tanh:
            return tanh_t(x);
        case LayerSpec::Kind::Sigmoid:
            return sigmoid(x);
        case LayerSpec::Kind::MaxPool:
            return maxpool2d(x);
        case LayerSpec::Kind::PoolTo1:
            return maxpool_to_1x1(x);
        case LayerSpec::Kind::Dropout: {
            if (mode == Mode::Eval) return x;
            require(dropout_rng != nullptr, "forward: train-mode dropout needs a random stream");
            return dropout(x, l.rate, mode, dropout_rng->next_u64());
        }
        case LayerSpec::Kind::Flatten:
            return reshape(x, {x.dim(0), x.size() / x.dim(0)});
        case LayerSpec::Kind::Reshape: {
            std::vector<std::size_t> shape = {x.dim(0)};
            shape.insert(shape.end(), l.dims.begin(), l.dims.end());
            return reshape(x, shape);
        }
        case LayerSpec::Kind::Linear:
            return linear(x, store.get(l.name + ".w"), store.get(l.name + ".b"));
        case LayerSpec::Kind::Residual:
            return add(x, forward_layers(l.body, store, x, mode, dropout_rng));
    }
    throw std::logic_error("forward: unhandled layer kind");
}

inline Tensor forward_layers(const std::vector<LayerSpec>& layers, ParamStore& store, Tensor x,
                             Mode mode, Rng* dropout_rng) {
    for (const auto& l : layers) x = forward_layer(l, store, x, mode, dropout_rng);
    return x;
}

}  // namespace detail

struct ClassicalModel {
    ModelSpec spec;
    ParamStore params;

    Tensor forward(const Tensor& x, Mode mode, Rng* dropout_rng = nullptr) {
        return detail::forward_layers(spec.layers, params, x, mode, dropout_rng);
    }
};

inline ClassicalModel build_from_spec(ModelSpec spec, std::uint64_t seed, std::uint64_t stream = 13) {
    ClassicalModel m;
    m.spec = std::move(spec);
    Rng rng(seed, stream);
    for (const auto& l : m.spec.layers) detail::register_layer_params(l, m.params, rng);
    return m;
}

// ---------------------------------------------------------------------------
// The five baseline detectors: depth-d stacks of conv3x3(pad 1) -> batchnorm
// -> relu -> maxpool2 with channel schedule (32, 64, 128, 256, 512), then
// flatten, 20% dropout, and one fully connected layer onto 2 labels
// (real = 0, fake = 1).
// ---------------------------------------------------------------------------

inline constexpr std::size_t kCnnChannelSchedule[5] = {32, 64, 128, 256, 512};

inline ModelSpec classical_cnn_spec(std::size_t depth, std::size_t input_hw = 32,
                                    std::size_t in_ch = 3, std::size_t classes = 2) {
    require(depth >= 1 && depth <= 5,
            "classical cnn: depth must be in [1,5], got " + std::to_string(depth));
    ModelSpec spec;
    spec.name = "classical-cnn-" + std::to_string(depth);
    std::size_t ch = in_ch, hw = input_hw;
    for (std::size_t d = 0; d < depth; ++d) {
        std::size_t out = kCnnChannelSchedule[d];
        std::string base = "b" + std::to_string(d + 1);
        spec.layers.push_back(LayerSpec::conv(base + ".conv", ch, out));
        spec.layers.push_back(LayerSpec::batchnorm(base + ".bn", out));
        spec.layers.push_back(LayerSpec::act(LayerSpec::Kind::Relu));
        spec.layers.push_back(LayerSpec::maxpool());
        ch = out;
        hw /= 2;
    }
    spec.layers.push_back(LayerSpec::flatten());
    spec.layers.push_back(LayerSpec::dropout(0.2));
    spec.layers.push_back(LayerSpec::linear("head", ch * hw * hw, classes));
    return spec;
}

inline ClassicalModel build_classical_cnn(std::size_t depth, std::uint64_t seed) {
    ClassicalModel m;
    m.spec = classical_cnn_spec(depth);
    Rng rng(seed, 17);
    for (const auto& l : m.spec.layers) detail::register_layer_params(l, m.params, rng);
    return m;
}

// ---------------------------------------------------------------------------
// ResNet9-style sign classifier: stem 64, 128 + residual pair, 256,
// 512 + residual pair, pooled to 1x1 and a linear head.
// ---------------------------------------------------------------------------

inline ModelSpec resnet9_spec(std::size_t num_classes, std::size_t width_divisor = 1,
                              std::size_t in_ch = 3) {
    require(num_classes >= 2, "resnet9: need at least 2 classes");
    require(width_divisor >= 1, "resnet9: width divisor must be positive");
    auto w = [&](std::size_t c) { return std::max<std::size_t>(1, c / width_divisor); };
    auto block = [&](const std::string& name, std::size_t in, std::size_t out, bool pool) {
        std::vector<LayerSpec> ls;
        ls.push_back(LayerSpec::conv(name + ".conv", in, out));
        ls.push_back(LayerSpec::batchnorm(name + ".bn", out));
        ls.push_back(LayerSpec::act(LayerSpec::Kind::Relu));
        if (pool) ls.push_back(LayerSpec::maxpool());
        return ls;
    };
    auto append = [](std::vector<LayerSpec>& dst, std::vector<LayerSpec> src) {
        for (auto& l : src) dst.push_back(std::move(l));
    };

    ModelSpec spec;
    spec.name = "resnet9";
    append(spec.layers, block("stem", in_ch, w(64), false));
    append(spec.layers, block("l1", w(64), w(128), true));
    {
        std::vector<LayerSpec> body;
        append(body, block("res1.a", w(128), w(128), false));
        append(body, block("res1.b", w(128), w(128), false));
        spec.layers.push_back(LayerSpec::residual("res1", std::move(body)));
    }
    append(spec.layers, block("l2", w(128), w(256), true));
    append(spec.layers, block("l3", w(256), w(512), true));
    {
        std::vector<LayerSpec> body;
        append(body, block("res2.a", w(512), w(512), false));
        append(body, block("res2.b", w(512), w(512), false));
        spec.layers.push_back(LayerSpec::residual("res2", std::move(body)));
    }
    spec.layers.push_back(LayerSpec::pool_to_1());
    spec.layers.push_back(LayerSpec::flatten());
    spec.layers.push_back(LayerSpec::linear("head", w(512), num_classes));
    return spec;
}

inline ClassicalModel build_resnet9(std::size_t num_classes, std::uint64_t seed,
                                    std::size_t width_divisor = 1) {
    ClassicalModel m;
    m.spec = resnet9_spec(num_classes, width_divisor);
    Rng rng(seed, 19);
    for (const auto& l : m.spec.layers) detail::register_layer_params(l, m.params, rng);
    return m;
}

// ---------------------------------------------------------------------------
// Hybrid quantum-classical detector: 32 independent circuits feed a 32-wide
// neuron vector into linear 32 -> 120, tanh, linear 120 -> 2.
// ---------------------------------------------------------------------------

struct HybridConfig {
    std::size_t n_circuits = 32;
    std::size_t hidden = 120;
    std::size_t classes = 2;
    double fd_epsilon = 1e-4;  // training gradient step for circuit angles
};

struct HybridModel {
    HybridConfig cfg;
    CircuitTopology topo;
    std::vector<LayerSpec> head;
    ParamStore params;

    Tensor forward(const Tensor& x, Mode mode, Rng* dropout_rng = nullptr);
    Tensor quantum_features(const Tensor& x);
};

inline HybridModel build_hybrid(std::uint64_t seed, HybridConfig cfg = {},
                                CircuitTopology topo = CircuitTopology::standard12()) {
    HybridModel m;
    m.cfg = cfg;
    m.topo = std::move(topo);
    m.topo.validate();
    Rng rng(seed, 23);
    std::size_t per_circuit = m.topo.param_count();
    for (std::size_t k = 0; k < cfg.n_circuits; ++k) {
        Tensor angles = Tensor::zeros({per_circuit});
        for (auto& v : angles.data())
            v = static_cast<float>(rng.uniform(-3.14159265358979323846, 3.14159265358979323846));
        std::string name = "circuit." + std::string(k < 10 ? "0" : "") + std::to_string(k);
        m.params.add(name, std::move(angles));
    }
    m.head.push_back(LayerSpec::linear("head1", cfg.n_circuits, cfg.hidden));
    m.head.push_back(LayerSpec::act(LayerSpec::Kind::Tanh));
    m.head.push_back(LayerSpec::linear("head2", cfg.hidden, cfg.classes));
    for (const auto& l : m.head) detail::register_layer_params(l, m.params, rng);
    return m;
}

/// Quantum stage: every circuit consumes the same encoded image; outputs the
/// N x n_circuits neuron matrix of <Z> readouts, each in [-1, 1]. Registered
/// on the tape with a finite-difference backward into the circuit angles.
inline Tensor HybridModel::quantum_features(const Tensor& x) {
    require(x.ndim() == 2, "hybrid: expected flattened pixel rows, got " + shape_str(x.shape()));
    std::size_t n = x.dim(0), px = x.dim(1);
    std::size_t kcirc = cfg.n_circuits;
    Tensor out = Tensor::zeros({n, kcirc});

    std::vector<Tensor> circuit_tensors;
    circuit_tensors.reserve(kcirc);
    for (std::size_t k = 0; k < kcirc; ++k)
        circuit_tensors.push_back(params.entries()[k].tensor);

    std::vector<QcnnParams> unpacked(kcirc);
    for (std::size_t k = 0; k < kcirc; ++k) {
        std::vector<double> flat(circuit_tensors[k].data().begin(), circuit_tensors[k].data().end());
        unpacked[k] = QcnnParams::unflatten(topo, flat);
    }

    const auto& xv = x.data();
    auto& ov = out.data();
    const CircuitTopology& tp = topo;
    parallel_for(n * kcirc, [&](std::size_t job) {
        std::size_t i = job / kcirc, k = job % kcirc;
        std::span<const float> pixels(xv.data() + i * px, px);
        ov[i * kcirc + k] = static_cast<float>(qcnn_expectation(pixels, unpacked[k], tp));
    });

    std::vector<Tensor> inputs;
    inputs.push_back(x);
    for (auto& t : circuit_tensors) inputs.push_back(t);
    double eps = cfg.fd_epsilon;
    auto xval = x;  // shared storage, read-only in the closure
    detail::record<float>(out, std::move(inputs), [xval, unpacked, tp, n, px, kcirc,
                                                   eps](const Tensor& gout) {
        // d loss / d angles_k = sum_i gout[i,k] * d <Z>(x_i; angles_k) / d angles,
        // each per-sample gradient by central finite differences.
        std::size_t nparams = unpacked.empty() ? 0 : unpacked[0].size();
        std::vector<std::vector<double>> acc(n * kcirc);
        const auto& xv2 = xval.data();
        parallel_for(n * kcirc, [&](std::size_t job) {
            std::size_t i = job / kcirc, k = job % kcirc;
            std::span<const float> pixels(xv2.data() + i * px, px);
            acc[job] = qcnn_grad_fd(pixels, unpacked[k], tp, eps);
        });
        std::vector<Tensor> grads;
        grads.emplace_back();  // pixels are treated as constants
        const auto& gv = gout.data();
        for (std::size_t k = 0; k < kcirc; ++k) {
            Tensor g = Tensor::zeros({nparams});
            for (std::size_t i = 0; i < n; ++i) {
                double w = static_cast<double>(gv[i * kcirc + k]);
                const auto& gi = acc[i * kcirc + k];
                for (std::size_t j = 0; j < nparams; ++j)
                    g.at(j) += static_cast<float>(w * gi[j]);
            }
            grads.push_back(std::move(g));
        }
        return grads;
    });
    return out;
}

inline Tensor HybridModel::forward(const Tensor& x, Mode mode, Rng* dropout_rng) {
    Tensor rows = x;
    if (x.ndim() != 2) rows = reshape(x, {x.dim(0), x.size() / x.dim(0)});
    const auto& rv = rows.data();
    std::size_t px = rows.dim(1);
    for (std::size_t i = 0; i < rows.dim(0); ++i) {
        bool nonzero = false;
        for (std::size_t j = 0; j < px; ++j)
            if (rv[i * px + j] != 0.0f) nonzero = true;
        require(nonzero, "hybrid: all-zero image at row " + std::to_string(i) +
                             " cannot be amplitude-encoded");
    }
    Tensor neurons = quantum_features(rows);
    return detail::forward_layers(head, params, neurons, mode, dropout_rng);
}

// ---------------------------------------------------------------------------
// Two-stage detection: the classifier assigns the sign type, then that
// type's dedicated detector decides real (0) vs fake (1).
// ---------------------------------------------------------------------------

using DetectorModel = std::variant<ClassicalModel, HybridModel>;

inline Tensor detector_forward(DetectorModel& m, const Tensor& x, Mode mode, Rng* rng = nullptr) {
    return std::visit([&](auto& model) { return model.forward(x, mode, rng); }, m);
}

inline ParamStore& detector_params(DetectorModel& m) {
    return std::visit([](auto& model) -> ParamStore& { return model.params; }, m);
}

/// One trained detector per sign class label.
struct DetectorBank {
    std::map<std::string, DetectorModel> by_class;
};

inline std::size_t argmax_row(const Tensor& logits, std::size_t row) {
    std::size_t k = logits.dim(1), best = 0;
    for (std::size_t j = 1; j < k; ++j)
        if (logits.at(row * k + j) > logits.at(row * k + best)) best = j;
    return best;
}

struct TwoStageResult {
    std::string sign_class;
    int provenance = 0;  // 0 = real, 1 = fake
};

/// Runs classify-then-detect on one image (3 x 32 x 32 pixels, flattened row).
inline TwoStageResult two_stage_detect(const Tensor& image, ClassicalModel& classifier,
                                       const std::vector<std::string>& class_labels,
                                       DetectorBank& bank) {
    require(image.size() == 3072, "two_stage_detect: expected 3x32x32 pixels, got " +
                                      std::to_string(image.size()) + " values");
    NoGradScope<float> frozen;
    Tensor batch = reshape(image, {1, 3, 32, 32});
    Tensor logits = classifier.forward(batch, Mode::Eval);
    require(logits.dim(1) == class_labels.size(),
            "two_stage_detect: classifier emits " + std::to_string(logits.dim(1)) + " classes, " +
                std::to_string(class_labels.size()) + " labels supplied");
    std::size_t cls = argmax_row(logits, 0);
    const std::string& label = class_labels[cls];
    auto it = bank.by_class.find(label);
    if (it == bank.by_class.end())
        throw std::invalid_argument("two_stage_detect: no detector for predicted class '" + label + "'");
    Tensor det_logits = detector_forward(it->second, batch, Mode::Eval);
    return {label, static_cast<int>(argmax_row(det_logits, 0))};
}

}  // namespace signet
