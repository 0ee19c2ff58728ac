#pragma once

#include <string>

#include "avtrack/params.hpp"

namespace avtrack::fusion {

struct FemConfig {
    int heads = 6;  // n
    int d_m = 192;  // feature width of primary/auxiliary tokens
    int d_k = 192;  // projection width shared by Q/K/V
};

// Multi-head scaled dot-product attention. Q: m x d_k, K/V: l x d_k; the
// logits are scaled by 1/sqrt(d_k) (the full projection width) and the heads
// are contiguous column groups of width d_k/n.
nn::Var attention(const nn::Var& q, const nn::Var& k, const nn::Var& v, int heads);

// Two-stage residual cross-attention injecting auxiliary tokens L into
// primary tokens M:
//   q2      = Attention(M Wq1, L Wk1, L Wv1)
//   out     = M + Attention(q2, L Wk2, L Wv2) W
// All projections are bias-free, so an all-zero L leaves M unchanged exactly.
struct Fem {
    FemConfig cfg;
    nn::Var w_q1, w_k1, w_v1;  // d_m x d_k
    nn::Var w_k2, w_v2;        // d_m x d_k
    nn::Var w_out;             // d_k x d_m

    Fem() = default;
    Fem(nn::ParamRegistry& reg, const std::string& prefix, const FemConfig& cfg);

    nn::Var forward(const nn::Var& primary, const nn::Var& auxiliary) const;
};

// Adaptive audio-visual fusion:
//   F = Phi(psi_t, psi_s) + Phi(Phi(psi_t, psi_s), alpha * Upsilon Wv)
// alpha in [0,1] scales the projected visual tokens; values outside the range
// are clamped and counted. With outer_residual=false the first term is not
// re-added (ablation switch; default mirrors the formula as written).
struct Aam {
    Fem fem_audio;
    Fem fem_visual;
    nn::Var w_vis;  // vis_dim x d_m, bias-free
    bool outer_residual = true;
    mutable long alpha_clamp_count = 0;

    Aam() = default;
    Aam(nn::ParamRegistry& reg, const std::string& prefix, const FemConfig& cfg, int vis_dim,
        bool outer_residual);

    nn::Var fuse(const nn::Var& psi_t, const nn::Var& psi_s, const nn::Var& upsilon,
                 const nn::Var& alpha) const;
};

}  // namespace avtrack::fusion
