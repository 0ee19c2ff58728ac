#include "avtrack/fusion.hpp"

#include <cmath>

#include "avtrack/errors.hpp"

namespace avtrack::fusion {

using nn::Var;

Var attention(const Var& q, const Var& k, const Var& v, int heads) {
    const int dk = q->val.cols;
    if (k->val.cols != dk || v->val.cols != dk)
        throw ShapeError("attention: Q/K/V widths differ");
    if (k->val.rows != v->val.rows) throw ShapeError("attention: K/V lengths differ");
    if (heads < 1 || dk % heads != 0)
        throw ConfigError("attention: head count must divide d_k");
    const int hd = dk / heads;
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dk));

    std::vector<Var> outs;
    outs.reserve(heads);
    for (int h = 0; h < heads; ++h) {
        auto qh = nn::slice_cols(q, h * hd, hd);
        auto kh = nn::slice_cols(k, h * hd, hd);
        auto vh = nn::slice_cols(v, h * hd, hd);
        auto logits = nn::scale(nn::matmul(qh, nn::transpose_op(kh)), inv_scale);
        outs.push_back(nn::matmul(nn::softmax_rows(logits), vh));
    }
    return heads == 1 ? outs[0] : nn::concat_cols(outs);
}

Fem::Fem(nn::ParamRegistry& reg, const std::string& prefix, const FemConfig& c) : cfg(c) {
    if (cfg.d_k % cfg.heads != 0) throw ConfigError("fem: heads must divide d_k");
    const double sd = 1.0 / std::sqrt(static_cast<double>(cfg.d_m));
    w_q1 = reg.add_randn(prefix + ".w_q1", cfg.d_m, cfg.d_k, sd);
    w_k1 = reg.add_randn(prefix + ".w_k1", cfg.d_m, cfg.d_k, sd);
    w_v1 = reg.add_randn(prefix + ".w_v1", cfg.d_m, cfg.d_k, sd);
    w_k2 = reg.add_randn(prefix + ".w_k2", cfg.d_m, cfg.d_k, sd);
    w_v2 = reg.add_randn(prefix + ".w_v2", cfg.d_m, cfg.d_k, sd);
    // Zero start: the fusion path switches on as w_out learns.
    w_out = reg.add_zeros(prefix + ".w_out", cfg.d_k, cfg.d_m);
}

Var Fem::forward(const Var& primary, const Var& auxiliary) const {
    if (primary->val.cols != cfg.d_m || auxiliary->val.cols != cfg.d_m)
        throw ShapeError("fem: token width must equal d_m");
    auto q2 = attention(nn::matmul(primary, w_q1), nn::matmul(auxiliary, w_k1),
                        nn::matmul(auxiliary, w_v1), cfg.heads);
    auto enhanced = attention(q2, nn::matmul(auxiliary, w_k2), nn::matmul(auxiliary, w_v2),
                              cfg.heads);
    return nn::add(primary, nn::matmul(enhanced, w_out));
}

Aam::Aam(nn::ParamRegistry& reg, const std::string& prefix, const FemConfig& cfg, int vis_dim,
         bool outer_residual_)
    : fem_audio(reg, prefix + ".fem_audio", cfg),
      fem_visual(reg, prefix + ".fem_visual", cfg),
      outer_residual(outer_residual_) {
    w_vis = reg.add_randn(prefix + ".w_vis", vis_dim, cfg.d_m,
                          1.0 / std::sqrt(static_cast<double>(vis_dim)));
}

Var Aam::fuse(const Var& psi_t, const Var& psi_s, const Var& upsilon, const Var& alpha) const {
    if (alpha->val.rows != 1 || alpha->val.cols != 1)
        throw ShapeError("aam: alpha must be a scalar");
    Var a = alpha;
    const double av = alpha->val.v[0];
    if (av < 0.0 || av > 1.0) {
        ++alpha_clamp_count;
        a = nn::clamp_op(alpha, 0.0, 1.0);
    }
    auto audio = fem_audio.forward(psi_t, psi_s);
    auto vis = nn::scale_by(nn::matmul(upsilon, w_vis), a);
    auto fused = fem_visual.forward(audio, vis);
    return outer_residual ? nn::add(audio, fused) : fused;
}

}  // namespace avtrack::fusion
