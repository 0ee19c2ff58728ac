#include "avtrack/vision.hpp"

#include <cmath>

#include "avtrack/errors.hpp"

namespace avtrack::vision {

using nn::Var;

VisionEncoder::VisionEncoder(nn::ParamRegistry& reg, const std::string& prefix,
                             const VisionConfig& c)
    : cfg(c) {
    if (cfg.image_size % cfg.patch_size != 0)
        throw ConfigError("vision: patch size must divide image size");
    const int per_side = cfg.image_size / cfg.patch_size;
    const int patches = per_side * per_side;
    const int patch_dim = 3 * cfg.patch_size * cfg.patch_size;
    embed = audio::PatchEmbed(reg, prefix + ".embed", patch_dim, patches, cfg.dim);
    ssm::BlockConfig bc = cfg.block;
    bc.dim = cfg.dim;
    blocks.reserve(cfg.depth);
    for (int i = 0; i < cfg.depth; ++i)
        blocks.emplace_back(reg, prefix + ".block" + std::to_string(i), bc);
}

nn::Tensor VisionEncoder::image_patches(const ImageFrame& img, int patch_size) {
    if (img.height % patch_size != 0 || img.width % patch_size != 0)
        throw ShapeError("image patches: dimensions not divisible by patch size");
    const int py = img.height / patch_size;
    const int px = img.width / patch_size;
    nn::Tensor out(py * px, 3 * patch_size * patch_size);
    for (int gy = 0; gy < py; ++gy) {
        for (int gx = 0; gx < px; ++gx) {
            double* dst = out.row_ptr(gy * px + gx);
            size_t i = 0;
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < patch_size; ++y)
                    for (int x = 0; x < patch_size; ++x)
                        dst[i++] = img.at(c, gy * patch_size + y, gx * patch_size + x);
        }
    }
    return out;
}

Var VisionEncoder::encode(const ImageFrame& img) const {
    auto tokens = embed.forward(image_patches(img, cfg.patch_size));
    for (const auto& b : blocks) tokens = b.forward(tokens);
    return tokens;
}

StudentHeads::StudentHeads(nn::ParamRegistry& reg, const std::string& prefix, int dim,
                           int hidden) {
    w_c1 = reg.add_randn(prefix + ".w_c1", dim, hidden, 1.0 / std::sqrt(dim));
    b_c1 = reg.add_zeros(prefix + ".b_c1", 1, hidden);
    w_c2 = reg.add_randn(prefix + ".w_c2", hidden, 2, 1.0 / std::sqrt(hidden));
    b_c2 = reg.add_zeros(prefix + ".b_c2", 1, 2);
    w_e = reg.add_randn(prefix + ".w_e", dim, 1, 1.0 / std::sqrt(dim));
    b_e = reg.add_zeros(prefix + ".b_e", 1, 1);
}

StudentOutput StudentHeads::forward(const Var& token_row) const {
    auto h = nn::silu(nn::add_rowvec(nn::matmul(token_row, w_c1), b_c1));
    StudentOutput out;
    out.center = nn::sigmoid(nn::add_rowvec(nn::matmul(h, w_c2), b_c2));
    out.existence = nn::sigmoid(nn::add_rowvec(nn::matmul(token_row, w_e), b_e));
    return out;
}

}  // namespace avtrack::vision
