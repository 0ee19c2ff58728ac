#include "avtrack/ssm.hpp"

#include <cmath>

#include "avtrack/errors.hpp"

namespace avtrack::ssm {

using nn::Var;

namespace {

// Per-channel time-step bias so softplus(b) lands log-uniform in
// [dt_min, dt_max] before the input-dependent part kicks in.
nn::Tensor delta_bias_init(uint64_t seed, const std::string& name, int inner) {
    auto rng = substream(seed, "param:" + name);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double dt_min = 1e-3, dt_max = 0.1;
    nn::Tensor t(1, inner);
    for (int i = 0; i < inner; ++i) {
        const double dt = std::exp(std::log(dt_min) + u(rng) * (std::log(dt_max) - std::log(dt_min)));
        t.v[i] = std::log(std::expm1(dt));  // inverse softplus
    }
    return t;
}

nn::Tensor a_log_init(int inner, int state_dim) {
    // A = -(1..d) per state index, replicated across channels.
    nn::Tensor t(inner, state_dim);
    for (int p = 0; p < inner; ++p)
        for (int s = 0; s < state_dim; ++s) t.at(p, s) = std::log(static_cast<double>(s + 1));
    return t;
}

}  // namespace

SelectiveSsm::SelectiveSsm(nn::ParamRegistry& reg, const std::string& prefix, int inner_,
                           int state_dim_, Discretization disc)
    : inner(inner_), state_dim(state_dim_), zoh(disc == Discretization::zoh) {
    a_log = reg.add(prefix + ".a_log", a_log_init(inner, state_dim));
    w_delta = reg.add_randn(prefix + ".w_delta", inner, inner, 0.01);
    b_delta = reg.add(prefix + ".b_delta", delta_bias_init(reg.seed, prefix + ".b_delta", inner));
    w_b = reg.add_randn(prefix + ".w_b", inner, state_dim, 1.0 / std::sqrt(inner));
    w_c = reg.add_randn(prefix + ".w_c", inner, state_dim, 1.0 / std::sqrt(inner));
}

Var SelectiveSsm::forward(const Var& x) const {
    if (x->val.cols != inner) throw ShapeError("selective ssm: token width mismatch");
    auto delta = nn::softplus(nn::add_rowvec(nn::matmul(x, w_delta), b_delta));
    auto b = nn::matmul(x, w_b);
    auto c = nn::matmul(x, w_c);
    auto a = nn::neg(nn::exp_op(a_log));
    return nn::selective_scan(x, delta, a, b, c, zoh);
}

MambaBlock::MambaBlock(nn::ParamRegistry& reg, const std::string& prefix, const BlockConfig& c)
    : cfg(c) {
    const int inner = cfg.dim * cfg.expansion;
    norm_gain = reg.add_full(prefix + ".norm", 1, cfg.dim, 1.0);
    w_in = reg.add_randn(prefix + ".w_in", cfg.dim, 2 * inner, 1.0 / std::sqrt(cfg.dim));
    conv_w = reg.add_randn(prefix + ".conv_w", cfg.conv_kernel, inner,
                           1.0 / std::sqrt(cfg.conv_kernel));
    conv_b = reg.add_zeros(prefix + ".conv_b", 1, inner);
    scan = SelectiveSsm(reg, prefix + ".ssm", inner, cfg.state_dim, cfg.discretization);
    w_out = reg.add_zeros(prefix + ".w_out", inner, cfg.dim);
}

Var MambaBlock::forward(const Var& tokens) const {
    const int inner = cfg.dim * cfg.expansion;
    auto normed = nn::rmsnorm_rows(tokens, norm_gain);
    auto xz = nn::matmul(normed, w_in);
    auto xp = nn::slice_cols(xz, 0, inner);
    auto zp = nn::slice_cols(xz, inner, inner);
    auto xa = nn::silu(nn::dwconv_causal(xp, conv_w, conv_b));
    auto y = scan.forward(xa);
    auto gated = nn::mul(y, nn::silu(zp));
    return nn::add(tokens, nn::matmul(gated, w_out));
}

BidirMambaBlock::BidirMambaBlock(nn::ParamRegistry& reg, const std::string& prefix,
                                 const BlockConfig& c)
    : cfg(c) {
    const int inner = cfg.dim * cfg.expansion;
    norm_gain = reg.add_full(prefix + ".norm", 1, cfg.dim, 1.0);
    w_in = reg.add_randn(prefix + ".w_in", cfg.dim, 2 * inner, 1.0 / std::sqrt(cfg.dim));
    conv_fw_w = reg.add_randn(prefix + ".conv_fw_w", cfg.conv_kernel, inner,
                              1.0 / std::sqrt(cfg.conv_kernel));
    conv_fw_b = reg.add_zeros(prefix + ".conv_fw_b", 1, inner);
    conv_bw_w = reg.add_randn(prefix + ".conv_bw_w", cfg.conv_kernel, inner,
                              1.0 / std::sqrt(cfg.conv_kernel));
    conv_bw_b = reg.add_zeros(prefix + ".conv_bw_b", 1, inner);
    scan_fw = SelectiveSsm(reg, prefix + ".ssm_fw", inner, cfg.state_dim, cfg.discretization);
    scan_bw = SelectiveSsm(reg, prefix + ".ssm_bw", inner, cfg.state_dim, cfg.discretization);
    w_out = reg.add_zeros(prefix + ".w_out", inner, cfg.dim);
}

Var BidirMambaBlock::forward(const Var& tokens) const {
    const int inner = cfg.dim * cfg.expansion;
    auto normed = nn::rmsnorm_rows(tokens, norm_gain);
    auto xz = nn::matmul(normed, w_in);
    auto xp = nn::slice_cols(xz, 0, inner);
    auto zp = nn::slice_cols(xz, inner, inner);

    auto fwd = scan_fw.forward(nn::silu(nn::dwconv_causal(xp, conv_fw_w, conv_fw_b)));
    auto rev_in = nn::flip_rows(xp);
    auto bwd = nn::flip_rows(
        scan_bw.forward(nn::silu(nn::dwconv_causal(rev_in, conv_bw_w, conv_bw_b))));

    auto gated = nn::mul(nn::add(fwd, bwd), nn::silu(zp));
    return nn::add(tokens, nn::matmul(gated, w_out));
}

MambaStack::MambaStack(nn::ParamRegistry& reg, const std::string& prefix, const BlockConfig& cfg,
                       int depth) {
    blocks.reserve(depth);
    for (int i = 0; i < depth; ++i)
        blocks.emplace_back(reg, prefix + ".block" + std::to_string(i), cfg);
}

Var MambaStack::forward(Var tokens) const {
    for (const auto& b : blocks) tokens = b.forward(tokens);
    return tokens;
}

}  // namespace avtrack::ssm
