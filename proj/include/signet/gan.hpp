#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "signet/common.hpp"
#include "signet/layers.hpp"
#include "signet/models.hpp"
#include "signet/optim.hpp"
#include "signet/rng.hpp"
#include "signet/tensor.hpp"

namespace signet {

// ---------------------------------------------------------------------------
// Builders. Generator: latent 100 projected to 256x4x4, then stride-2
// transposed conv stages 256 -> 128 -> 64 -> 3 up to 3x32x32, squashed by
// tanh. Critic: stride-2 conv stages 3 -> 64 -> 128 -> 256 with
// leaky_relu(0.2), no normalization, and a final linear score.
// ---------------------------------------------------------------------------

inline constexpr std::size_t kLatentDim = 100;

inline ModelSpec generator_spec(std::size_t latent_dim = kLatentDim) {
    ModelSpec spec;
    spec.name = "generator";
    spec.layers.push_back(LayerSpec::linear("project", latent_dim, 256 * 4 * 4, LayerSpec::Init::He));
    spec.layers.push_back(LayerSpec::reshape({256, 4, 4}));
    spec.layers.push_back(LayerSpec::act(LayerSpec::Kind::Relu));
    spec.layers.push_back(LayerSpec::conv_transpose("up1", 256, 128, 4, ConvGeom{2, 1}));
    spec.layers.push_back(LayerSpec::act(LayerSpec::Kind::Relu));
    spec.layers.push_back(LayerSpec::conv_transpose("up2", 128, 64, 4, ConvGeom{2, 1}));
    spec.layers.push_back(LayerSpec::act(LayerSpec::Kind::Relu));
    spec.layers.push_back(
        LayerSpec::conv_transpose("up3", 64, 3, 4, ConvGeom{2, 1}, LayerSpec::Init::Xavier));
    spec.layers.push_back(LayerSpec::act(LayerSpec::Kind::Tanh));
    return spec;
}

inline ModelSpec critic_spec(bool sigmoid_head = false) {
    ModelSpec spec;
    spec.name = "critic";
    spec.layers.push_back(LayerSpec::conv("c1", 3, 64, 4, ConvGeom{2, 1}));
    spec.layers.push_back(LayerSpec::act(LayerSpec::Kind::LeakyRelu));
    spec.layers.push_back(LayerSpec::conv("c2", 64, 128, 4, ConvGeom{2, 1}));
    spec.layers.push_back(LayerSpec::act(LayerSpec::Kind::LeakyRelu));
    spec.layers.push_back(LayerSpec::conv("c3", 128, 256, 4, ConvGeom{2, 1}));
    spec.layers.push_back(LayerSpec::act(LayerSpec::Kind::LeakyRelu));
    spec.layers.push_back(LayerSpec::flatten());
    spec.layers.push_back(LayerSpec::linear("score", 256 * 4 * 4, 1));
    if (sigmoid_head) spec.layers.push_back(LayerSpec::act(LayerSpec::Kind::Sigmoid));
    return spec;
}

inline ClassicalModel build_generator(std::uint64_t seed, std::size_t latent_dim = kLatentDim) {
    return build_from_spec(generator_spec(latent_dim), seed, 29);
}

inline ClassicalModel build_critic(std::uint64_t seed, bool sigmoid_head = false) {
    return build_from_spec(critic_spec(sigmoid_head), seed, 31);
}

/// Miniature MLP pairs for toy distributions (vectors instead of images).
/// The tanh head keeps outputs in [-1,1] like the image generator.
inline ClassicalModel build_mlp_generator(std::size_t latent_dim, std::size_t hidden,
                                          std::size_t out_dim, std::uint64_t seed,
                                          bool tanh_head = true) {
    ModelSpec spec;
    spec.name = "toy-generator";
    spec.layers.push_back(LayerSpec::linear("l1", latent_dim, hidden, LayerSpec::Init::He));
    spec.layers.push_back(LayerSpec::act(LayerSpec::Kind::Relu));
    spec.layers.push_back(LayerSpec::linear("l2", hidden, out_dim));
    if (tanh_head) spec.layers.push_back(LayerSpec::act(LayerSpec::Kind::Tanh));
    return build_from_spec(std::move(spec), seed, 37);
}

inline ClassicalModel build_mlp_critic(std::size_t in_dim, std::size_t hidden, std::uint64_t seed,
                                       bool sigmoid_head = false) {
    ModelSpec spec;
    spec.name = "toy-critic";
    spec.layers.push_back(LayerSpec::linear("l1", in_dim, hidden, LayerSpec::Init::He));
    spec.layers.push_back(LayerSpec::act(LayerSpec::Kind::LeakyRelu));
    spec.layers.push_back(LayerSpec::linear("l2", hidden, 1));
    if (sigmoid_head) spec.layers.push_back(LayerSpec::act(LayerSpec::Kind::Sigmoid));
    return build_from_spec(std::move(spec), seed, 41);
}

// ---------------------------------------------------------------------------
// Eq.-3 interpolation and the gradient penalty.
// ---------------------------------------------------------------------------

/// x_hat = t*g + (1-t)*x elementwise; endpoints are bit-exact.
inline Tensor interpolate(const Tensor& x, const Tensor& g, double t) {
    require(x.shape() == g.shape(), "interpolate: shape " + shape_str(x.shape()) + " vs " +
                                        shape_str(g.shape()));
    require(t >= 0.0 && t <= 1.0, "interpolate: t must lie in [0,1], got " + std::to_string(t));
    Tensor out = Tensor::zeros(x.shape());
    const auto& xv = x.data();
    const auto& gv = g.data();
    auto& ov = out.data();
    if (t == 0.0) {
        ov = xv;
    } else if (t == 1.0) {
        ov = gv;
    } else {
        float tf = static_cast<float>(t);
        for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = tf * gv[i] + (1.0f - tf) * xv[i];
    }
    return out;
}

/// The critic ops through which the penalty's second-order gradients flow.
/// Sigmoid is admitted for the log-form mode's squashed head.
inline void validate_critic_for_penalty(const ModelSpec& spec) {
    for (const auto& l : spec.layers) {
        switch (l.kind) {
            case LayerSpec::Kind::Conv:
            case LayerSpec::Kind::Linear:
            case LayerSpec::Kind::LeakyRelu:
            case LayerSpec::Kind::Flatten:
            case LayerSpec::Kind::Reshape:
            case LayerSpec::Kind::Sigmoid:
                continue;
            default: {
                const char* name = "unsupported layer";
                switch (l.kind) {
                    case LayerSpec::Kind::BatchNorm: name = "batchnorm2d"; break;
                    case LayerSpec::Kind::Relu: name = "relu"; break;
                    case LayerSpec::Kind::Tanh: name = "tanh"; break;
                    case LayerSpec::Kind::MaxPool: name = "maxpool2d"; break;
                    case LayerSpec::Kind::PoolTo1: name = "maxpool2d"; break;
                    case LayerSpec::Kind::Dropout: name = "dropout"; break;
                    case LayerSpec::Kind::ConvTranspose: name = "conv_transpose2d"; break;
                    case LayerSpec::Kind::Residual: name = "residual"; break;
                    default: break;
                }
                throw std::invalid_argument(std::string("gradient penalty: critic contains ") + name +
                                            ", outside the double-differentiable subset");
            }
        }
    }
}

struct PenaltyResult {
    Tensor penalty;        // mean (||dD/dx_hat|| - 1)^2, on the tape
    double mean_norm = 0;  // mean ||dD/dx_hat|| over the batch, for logging
};

/// Mean over the batch of (||d D / d x_hat||_2 - 1)^2 at per-sample random
/// interpolates; differentiable w.r.t. the critic parameters. The lambda
/// factor is applied by the caller.
inline PenaltyResult gradient_penalty_stats(Tape& tape, ClassicalModel& critic, const Tensor& x_batch,
                                            const Tensor& g_batch, Rng& rng) {
    validate_critic_for_penalty(critic.spec);
    require(x_batch.shape() == g_batch.shape(), "gradient penalty: real/fake batch shapes differ");
    std::size_t n = x_batch.dim(0);
    std::size_t per = x_batch.size() / n;
    Tensor x_hat = Tensor::zeros(x_batch.shape());
    for (std::size_t i = 0; i < n; ++i) {
        float t = static_cast<float>(rng.uniform());
        for (std::size_t j = 0; j < per; ++j)
            x_hat.data()[i * per + j] = t * g_batch.data()[i * per + j] +
                                        (1.0f - t) * x_batch.data()[i * per + j];
    }
    auto critic_eval = [&critic](const Tensor& xin) {
        return critic.forward(xin, Mode::Eval, nullptr);
    };
    Tensor norms = input_grad_norm<float>(tape, critic_eval, x_hat);
    PenaltyResult out;
    for (float v : norms.data()) out.mean_norm += static_cast<double>(v);
    out.mean_norm /= static_cast<double>(n);
    out.penalty = mean(square(add_scalar(norms, -1.0f)));
    return out;
}

inline Tensor gradient_penalty(Tape& tape, ClassicalModel& critic, const Tensor& x_batch,
                               const Tensor& g_batch, Rng& rng) {
    return gradient_penalty_stats(tape, critic, x_batch, g_batch, rng).penalty;
}

// ---------------------------------------------------------------------------
// Losses. Canonical WGAN-GP: critic minimizes mean D(G(z)) - mean D(x) +
// lambda * penalty, generator minimizes -mean D(G(z)). The literal log-form
// mode keeps the same penalty but scores through logarithms, which requires
// a strictly positive critic (sigmoid head).
// ---------------------------------------------------------------------------

enum class GanLossMode { Canonical, PaperLiteral };

struct GanTrainConfig {
    double lambda = 10.0;
    std::size_t critic_steps = 5;      // critic updates per generator step
    double learning_rate = 1e-4;
    double beta1 = 0.0;
    double beta2 = 0.9;
    std::size_t batch_size = 16;
    std::size_t generator_steps = 0;
    std::uint64_t seed = 0;
    GanLossMode mode = GanLossMode::Canonical;
    std::size_t latent_dim = kLatentDim;
};

namespace detail {

inline Tensor mean_scores(ClassicalModel& critic, const Tensor& batch) {
    return mean(critic.forward(batch, Mode::Eval, nullptr));
}

inline Tensor mean_log_scores(ClassicalModel& critic, const Tensor& batch) {
    Tensor scores = critic.forward(batch, Mode::Eval, nullptr);
    for (float v : scores.data())
        require(v > 0.0f,
                "paper_literal loss: critic score " + std::to_string(v) +
                    " is not positive; use a sigmoid-squashed critic head in this mode");
    return mean(log_t(scores));
}

}  // namespace detail

/// Critic objective (to minimize). The penalty term is passed in so callers
/// can log its magnitude.
inline Tensor critic_loss(ClassicalModel& critic, const Tensor& real_batch, const Tensor& fake_batch,
                          const Tensor& penalty, const GanTrainConfig& cfg) {
    Tensor lam_pen = scale(penalty, static_cast<float>(cfg.lambda));
    if (cfg.mode == GanLossMode::Canonical) {
        return add(sub(detail::mean_scores(critic, fake_batch), detail::mean_scores(critic, real_batch)),
                   lam_pen);
    }
    return add(sub(detail::mean_log_scores(critic, fake_batch),
                   detail::mean_log_scores(critic, real_batch)),
               lam_pen);
}

inline Tensor generator_loss(ClassicalModel& critic, const Tensor& fake_batch,
                             const GanTrainConfig& cfg) {
    if (cfg.mode == GanLossMode::Canonical) return neg(detail::mean_scores(critic, fake_batch));
    return neg(detail::mean_log_scores(critic, fake_batch));
}

// ---------------------------------------------------------------------------
// Training loop: critic_steps critic updates per generator update.
// ---------------------------------------------------------------------------

struct GanStepRow {
    std::size_t step = 0;
    double critic_loss = 0.0;
    double generator_loss = 0.0;
    double penalty = 0.0;
    double grad_norm = 0.0;  // mean ||dD/dx_hat|| over this step's critic updates
};

struct GanHistory {
    std::vector<GanStepRow> rows;

    std::string to_csv() const {
        std::string out = "step,critic_loss,generator_loss,penalty,grad_norm\n";
        char buf[160];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.6f,%.6f,%.6f\n", r.step, r.critic_loss,
                          r.generator_loss, r.penalty, r.grad_norm);
            out += buf;
        }
        return out;
    }
};

namespace detail {

inline Tensor sample_latents(std::size_t n, std::size_t latent_dim, Rng& rng) {
    Tensor z = Tensor::zeros({n, latent_dim});
    for (auto& v : z.data()) v = static_cast<float>(rng.normal());
    return z;
}

inline Tensor sample_real(const std::vector<std::vector<float>>& data,
                          const std::vector<std::size_t>& shape, std::size_t n, Rng& rng) {
    std::vector<std::size_t> full = {n};
    full.insert(full.end(), shape.begin(), shape.end());
    Tensor batch = Tensor::zeros(full);
    std::size_t per = shape_size(shape);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = data[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(data.size()) - 1))];
        require(row.size() == per, "gan: sample does not fill the configured shape");
        std::copy(row.begin(), row.end(), batch.data().begin() + i * per);
    }
    return batch;
}

}  // namespace detail

/// Trains generator and critic in tandem with caller-owned optimizer states
/// (the hook for resuming). `sample_shape` is the per-sample tensor shape
/// ({3,32,32} for images, {d} for toy vectors).
inline GanHistory train_wgan_gp(ClassicalModel& generator, ClassicalModel& critic,
                                const std::vector<std::vector<float>>& real_data,
                                const std::vector<std::size_t>& sample_shape,
                                const GanTrainConfig& cfg, AdamState& gen_state,
                                AdamState& critic_state) {
    require(!real_data.empty(), "gan: real dataset is empty");
    validate_critic_for_penalty(critic.spec);

    Rng data_rng(cfg.seed, 211);
    Rng z_rng(cfg.seed, 223);
    Rng t_rng(cfg.seed, 227);

    GanHistory history;
    for (std::size_t step = 1; step <= cfg.generator_steps; ++step) {
        GanStepRow row;
        row.step = step;
        double norm_acc = 0.0;

        for (std::size_t cstep = 0; cstep < cfg.critic_steps; ++cstep) {
            Tensor real = detail::sample_real(real_data, sample_shape, cfg.batch_size, data_rng);
            Tensor fake;
            {
                NoGradScope<float> detached;
                Tensor z = detail::sample_latents(cfg.batch_size, cfg.latent_dim, z_rng);
                fake = generator.forward(z, Mode::Eval, nullptr);
            }
            Tape tape;
            TapeScope<float> scope(tape);
            PenaltyResult pen = gradient_penalty_stats(tape, critic, real, fake, t_rng);
            Tensor loss = critic_loss(critic, real, fake, pen.penalty, cfg);
            if (!std::isfinite(loss.item()))
                throw std::runtime_error("gan: non-finite critic loss at generator step " +
                                         std::to_string(step));
            critic.params.zero_grad();
            backward(tape, loss);
            adam_step(critic.params, critic_state);

            row.critic_loss = loss.item();
            row.penalty = pen.penalty.item();
            norm_acc += pen.mean_norm;
        }

        Tensor z = detail::sample_latents(cfg.batch_size, cfg.latent_dim, z_rng);
        Tape tape;
        TapeScope<float> scope(tape);
        Tensor fake = generator.forward(z, Mode::Eval, nullptr);
        Tensor gloss = generator_loss(critic, fake, cfg);
        if (!std::isfinite(gloss.item()))
            throw std::runtime_error("gan: non-finite generator loss at step " + std::to_string(step));
        generator.params.zero_grad();
        critic.params.zero_grad();
        backward(tape, gloss);
        adam_step(generator.params, gen_state);

        row.generator_loss = gloss.item();
        row.grad_norm = norm_acc / static_cast<double>(cfg.critic_steps);
        history.rows.push_back(row);
    }
    return history;
}

inline GanHistory train_wgan_gp(ClassicalModel& generator, ClassicalModel& critic,
                                const std::vector<std::vector<float>>& real_data,
                                const std::vector<std::size_t>& sample_shape,
                                const GanTrainConfig& cfg) {
    AdamConfig opt{cfg.learning_rate, cfg.beta1, cfg.beta2, 1e-8};
    AdamState gen_state = AdamState::make(generator.params, opt);
    AdamState critic_state = AdamState::make(critic.params, opt);
    return train_wgan_gp(generator, critic, real_data, sample_shape, cfg, gen_state, critic_state);
}

// ---------------------------------------------------------------------------
// Latent-vector attack: for a real image x, gradient-ascend ||G(z) - x||^2
// over z from a fixed number of random restarts and keep the best.
// ---------------------------------------------------------------------------

struct AttackConfig {
    std::size_t restarts = 8;
    std::size_t steps = 50;
    double step_size = 0.05;
    std::uint64_t seed = 0;
    std::size_t latent_dim = kLatentDim;
};

struct AttackResult {
    std::vector<float> z_star;
    std::vector<float> fake;
    double objective = 0.0;
    std::size_t restart_index = 0;
};

/// Objective of one latent vector (no gradients).
inline double attack_objective(ClassicalModel& generator, const std::vector<float>& z,
                               const std::vector<float>& target) {
    NoGradScope<float> frozen;
    Tensor zt = Tensor::from({1, z.size()}, z);
    Tensor g = generator.forward(zt, Mode::Eval, nullptr);
    require(g.size() == target.size(), "attack: generator output size " + std::to_string(g.size()) +
                                           " does not match target " + std::to_string(target.size()));
    double acc = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        double d = static_cast<double>(g.data()[i]) - static_cast<double>(target[i]);
        acc += d * d;
    }
    return acc;
}

inline AttackResult attack(const std::vector<float>& target, ClassicalModel& generator,
                           const AttackConfig& cfg) {
    require(cfg.restarts >= 1, "attack: need at least one restart");
    Rng root(cfg.seed, 307);
    AttackResult best;
    best.objective = -1.0;

    for (std::size_t r = 0; r < cfg.restarts; ++r) {
        Rng stream = root.fork(r);
        std::vector<float> z(cfg.latent_dim);
        for (auto& v : z) v = static_cast<float>(stream.normal());

        for (std::size_t it = 0; it < cfg.steps; ++it) {
            Tape tape;
            TapeScope<float> scope(tape);
            Tensor zt = Tensor::from({1, cfg.latent_dim}, z);
            zt.set_requires_grad(true);
            Tensor g = generator.forward(zt, Mode::Eval, nullptr);
            Tensor flat = reshape(g, {std::size_t(1), g.size()});
            Tensor tgt = Tensor::from({std::size_t(1), target.size()}, target);
            Tensor obj = sum(square(sub(flat, tgt)));
            Tensor gz = grad_of(tape, obj, {zt}, false)[0];
            for (std::size_t i = 0; i < z.size(); ++i)
                z[i] += static_cast<float>(cfg.step_size) * gz.data()[i];
        }
        double obj = attack_objective(generator, z, target);
        if (obj > best.objective) {
            best.objective = obj;
            best.z_star = z;
            best.restart_index = r;
            NoGradScope<float> frozen;
            Tensor zt = Tensor::from({1, cfg.latent_dim}, z);
            Tensor g = generator.forward(zt, Mode::Eval, nullptr);
            best.fake = g.data();
        }
    }
    return best;
}

}  // namespace signet
