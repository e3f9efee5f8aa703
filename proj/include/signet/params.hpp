#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "signet/common.hpp"
#include "signet/rng.hpp"
#include "signet/tensor.hpp"

namespace signet {

// ---------------------------------------------------------------------------
// Flat named parameter store. Trainable entries carry gradients; buffers
// (batch-norm running statistics, named *.running_mean / *.running_var) are
// persisted but never counted as trainable.
// ---------------------------------------------------------------------------

struct ParamEntry {
    std::string name;
    Tensor tensor;
    bool trainable = true;
};

class ParamStore {
public:
    Tensor& add(const std::string& name, Tensor t, bool trainable = true) {
        for (const auto& e : entries_)
            require(e.name != name, "param store: duplicate name '" + name + "'");
        t.set_requires_grad(trainable);
        entries_.push_back({name, std::move(t), trainable});
        return entries_.back().tensor;
    }

    Tensor& get(const std::string& name) {
        for (auto& e : entries_)
            if (e.name == name) return e.tensor;
        throw std::invalid_argument("param store: no entry named '" + name + "'");
    }

    const Tensor& get(const std::string& name) const {
        return const_cast<ParamStore*>(this)->get(name);
    }

    bool has(const std::string& name) const {
        for (const auto& e : entries_)
            if (e.name == name) return true;
        return false;
    }

    std::vector<ParamEntry>& entries() { return entries_; }
    const std::vector<ParamEntry>& entries() const { return entries_; }

    void zero_grad() {
        for (auto& e : entries_)
            if (e.trainable) e.tensor.zero_grad();
    }

    std::size_t trainable_count() const {
        std::size_t n = 0;
        for (const auto& e : entries_)
            if (e.trainable) n += e.tensor.size();
        return n;
    }

    /// Detached snapshot of every entry's values.
    std::vector<std::vector<float>> snapshot() const {
        std::vector<std::vector<float>> s;
        s.reserve(entries_.size());
        for (const auto& e : entries_) s.push_back(e.tensor.data());
        return s;
    }

    void restore(const std::vector<std::vector<float>>& s) {
        require(s.size() == entries_.size(), "param store: snapshot entry count mismatch");
        for (std::size_t i = 0; i < s.size(); ++i) {
            require(s[i].size() == entries_[i].tensor.size(),
                    "param store: snapshot size mismatch at '" + entries_[i].name + "'");
            entries_[i].tensor.data() = s[i];
        }
    }

private:
    std::vector<ParamEntry> entries_;
};

// ---------------------------------------------------------------------------
// Weight initialization. He-uniform ahead of relu-family activations,
// Xavier-uniform ahead of tanh/linear outputs.
// ---------------------------------------------------------------------------

inline Tensor he_uniform(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
    Tensor t = Tensor::zeros(std::move(shape));
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& v : t.data()) v = static_cast<float>(rng.uniform(-bound, bound));
    return t;
}

inline Tensor xavier_uniform(std::vector<std::size_t> shape, std::size_t fan_in, std::size_t fan_out,
                             Rng& rng) {
    Tensor t = Tensor::zeros(std::move(shape));
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& v : t.data()) v = static_cast<float>(rng.uniform(-bound, bound));
    return t;
}

}  // namespace signet
