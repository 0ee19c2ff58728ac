#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "avtrack/autodiff.hpp"

namespace avtrack::testutil {

using nn::Tensor;
using nn::Var;

inline Tensor randn(int r, int c, std::mt19937_64& rng, double sd = 1.0) {
    std::normal_distribution<double> d(0.0, sd);
    Tensor t(r, c);
    for (double& x : t.v) x = d(rng);
    return t;
}

struct GradCheckResult {
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    int checked = 0;
};

// Central finite differences against reverse-mode gradients. `build` must
// construct a fresh graph from the current leaf values and return a scalar.
inline GradCheckResult grad_check(const std::vector<Var>& leaves,
                                  const std::function<Var()>& build, double h = 1e-5) {
    nn::zero_grad(leaves);
    Var out = build();
    nn::backward(out);

    GradCheckResult res;
    for (const auto& leaf : leaves) {
        leaf->ensure_grad();
        for (size_t i = 0; i < leaf->val.v.size(); ++i) {
            const double orig = leaf->val.v[i];
            leaf->val.v[i] = orig + h;
            const double fp = build()->val.v[0];
            leaf->val.v[i] = orig - h;
            const double fm = build()->val.v[0];
            leaf->val.v[i] = orig;
            const double num = (fp - fm) / (2.0 * h);
            const double ana = leaf->grad.v[i];
            const double abs_err = std::fabs(num - ana);
            const double denom = std::max({std::fabs(num), std::fabs(ana), 1e-8});
            res.max_abs_err = std::max(res.max_abs_err, abs_err);
            res.max_rel_err = std::max(res.max_rel_err, abs_err / denom);
            ++res.checked;
        }
    }
    return res;
}

}  // namespace avtrack::testutil
