#pragma once

#include <vector>

#include "avtrack/audio_frontend.hpp"
#include "avtrack/params.hpp"
#include "avtrack/ssm.hpp"

namespace avtrack::vision {

// RGB image, values in [0,1], layout [channel][row][col].
struct ImageFrame {
    int height = 0;
    int width = 0;
    double timestamp = 0.0;
    std::vector<double> pixels;

    double& at(int c, int y, int x) {
        return pixels[(static_cast<size_t>(c) * height + y) * width + x];
    }
    double at(int c, int y, int x) const {
        return pixels[(static_cast<size_t>(c) * height + y) * width + x];
    }
};

struct VisionConfig {
    int image_size = 64;
    int patch_size = 16;
    int dim = 192;  // token width
    int depth = 2;  // bidirectional blocks
    ssm::BlockConfig block;
};

// Patch-embeds the image (same projection + trailing token + positional
// table machinery as the audio branch) and runs bidirectional scan blocks.
struct VisionEncoder {
    VisionConfig cfg;
    audio::PatchEmbed embed;
    std::vector<ssm::BidirMambaBlock> blocks;

    VisionEncoder() = default;
    VisionEncoder(nn::ParamRegistry& reg, const std::string& prefix, const VisionConfig& cfg);

    // Row-major 16x16 patches, flattened channel-major; returns (Jv+1) x dim.
    nn::Var encode(const ImageFrame& img) const;

    static nn::Tensor image_patches(const ImageFrame& img, int patch_size);
};

struct StudentOutput {
    nn::Var center;     // 1x2, normalized (u,v) in [0,1]^2
    nn::Var existence;  // 1x1 probability
};

// Heads on the learnable visual token: a small perceptron for the UAV image
// center and a sigmoid unit for drone existence.
struct StudentHeads {
    nn::Var w_c1, b_c1;  // dim x hidden
    nn::Var w_c2, b_c2;  // hidden x 2
    nn::Var w_e, b_e;    // dim x 1

    StudentHeads() = default;
    StudentHeads(nn::ParamRegistry& reg, const std::string& prefix, int dim, int hidden = 64);

    StudentOutput forward(const nn::Var& token_row) const;
};

}  // namespace avtrack::vision
