#pragma once

#include <string>
#include <utility>
#include <vector>

#include "avtrack/autodiff.hpp"
#include "avtrack/rng.hpp"

namespace avtrack::nn {

// Flat registry of named trainable tensors. Names are stable across runs and
// are the checkpoint key space.
struct ParamRegistry {
    uint64_t seed = 0;
    std::vector<std::pair<std::string, Var>> items;

    explicit ParamRegistry(uint64_t seed_ = 0) : seed(seed_) {}

    Var add(const std::string& name, Tensor init) {
        for (auto& [n, v] : items)
            if (n == name) throw ShapeError("duplicate parameter name: " + name);
        Var v = leaf(std::move(init), true);
        items.push_back({name, v});
        return v;
    }

    // Gaussian init with the RNG keyed by (seed, name): creation order has no
    // effect on initial values.
    Var add_randn(const std::string& name, int rows, int cols, double sd) {
        auto rng = substream(seed, "param:" + name);
        std::normal_distribution<double> d(0.0, sd);
        Tensor t(rows, cols);
        for (double& x : t.v) x = d(rng);
        return add(name, std::move(t));
    }

    Var add_zeros(const std::string& name, int rows, int cols) {
        return add(name, Tensor::zeros(rows, cols));
    }

    Var add_full(const std::string& name, int rows, int cols, double fill) {
        return add(name, Tensor::full(rows, cols, fill));
    }

    std::vector<Var> vars() const {
        std::vector<Var> out;
        out.reserve(items.size());
        for (auto& [n, v] : items) out.push_back(v);
        return out;
    }

    Var find(const std::string& name) const {
        for (auto& [n, v] : items)
            if (n == name) return v;
        return nullptr;
    }

    size_t scalar_count() const {
        size_t n = 0;
        for (auto& [name, v] : items) n += v->val.size();
        return n;
    }
};

}  // namespace avtrack::nn
