#pragma once

#include <string>
#include <vector>

#include "avtrack/params.hpp"

namespace avtrack::ssm {

enum class Discretization { zoh, euler };

struct BlockConfig {
    int dim = 192;        // token width D
    int state_dim = 16;   // d
    int expansion = 2;    // inner width = expansion * dim
    int conv_kernel = 4;  // depthwise conv taps
    Discretization discretization = Discretization::zoh;
};

// Diagonal selective state-space layer. The time step, input and output
// mixers adapt to each token; the continuous state matrix is stored
// log-negated so it stays strictly negative and the discrete pole exp(dt*A)
// stays inside (0, 1).
struct SelectiveSsm {
    int inner = 0;
    int state_dim = 0;
    bool zoh = true;
    nn::Var a_log;    // inner x d
    nn::Var w_delta;  // inner x inner
    nn::Var b_delta;  // 1 x inner
    nn::Var w_b;      // inner x d
    nn::Var w_c;      // inner x d

    SelectiveSsm() = default;
    SelectiveSsm(nn::ParamRegistry& reg, const std::string& prefix, int inner, int state_dim,
                 Discretization disc);

    nn::Var forward(const nn::Var& x) const;  // x: T x inner -> T x inner
};

// Pre-norm residual block: norm -> expand -> causal depthwise conv -> silu ->
// selective scan -> silu gate -> contract. The output projection starts at
// zero so a fresh block is the identity.
struct MambaBlock {
    BlockConfig cfg;
    nn::Var norm_gain;
    nn::Var w_in;    // D x 2*inner
    nn::Var conv_w;  // K x inner
    nn::Var conv_b;  // 1 x inner
    SelectiveSsm scan;
    nn::Var w_out;  // inner x D

    MambaBlock() = default;
    MambaBlock(nn::ParamRegistry& reg, const std::string& prefix, const BlockConfig& cfg);

    nn::Var forward(const nn::Var& tokens) const;
};

// Same residual wrapper but with forward and reversed scans whose outputs are
// summed before the gate; used by the vision encoder.
struct BidirMambaBlock {
    BlockConfig cfg;
    nn::Var norm_gain;
    nn::Var w_in;
    nn::Var conv_fw_w, conv_fw_b;
    nn::Var conv_bw_w, conv_bw_b;
    SelectiveSsm scan_fw, scan_bw;
    nn::Var w_out;

    BidirMambaBlock() = default;
    BidirMambaBlock(nn::ParamRegistry& reg, const std::string& prefix, const BlockConfig& cfg);

    nn::Var forward(const nn::Var& tokens) const;
};

struct MambaStack {
    std::vector<MambaBlock> blocks;

    MambaStack() = default;
    MambaStack(nn::ParamRegistry& reg, const std::string& prefix, const BlockConfig& cfg,
               int depth);

    nn::Var forward(nn::Var tokens) const;
};

}  // namespace avtrack::ssm
