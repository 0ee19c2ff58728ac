#pragma once

#include <nlohmann/json_fwd.hpp>
#include <string>

#include "avtrack/audio_frontend.hpp"
#include "avtrack/pseudo_label.hpp"
#include "avtrack/sim.hpp"

// vendored single-header nlohmann/json lives at vendor/json.hpp
#include <json.hpp>

namespace avtrack::config {

using Json = nlohmann::ordered_json;

struct PatchConfig {
    int w = 4;  // temporal patch width (frames)
    int h = 1;  // spectral patch height (mel bins)
};

struct ModelConfig {
    std::string variant = "full";
    // audio_t | audio_s | audio_concat | audio_fem | visual | av_concat | full
    int embed_dim = 192;  // token width D (must equal fem.d_m)
    int state_dim = 16;   // SSM state size d
    int depth = 12;       // audio blocks per stack (L)
    int conv_kernel = 4;
    int expansion = 2;
    std::string discretization = "zoh";  // zoh | euler
    int vision_depth = 2;
    int image_size = 64;
    int image_patch = 16;
    int num_classes = 4;
    int head_hidden = 128;
    bool aam_outer_residual = true;
    std::string alpha_source = "student";  // student | teacher | fixed
    double alpha_fixed = 1.0;
};

struct FemSettings {
    int heads = 6;
    int d_m = 192;
    int d_k = 192;
};

struct LossConfig {
    double gamma1 = 2.0;
    double gamma2 = 0.5;
    double prob_floor = 1e-12;
};

struct DbscanConfig {
    double eps = 0.7;
    int min_pts = 4;
};

struct TrainConfig {
    double lr = 1e-4;
    int batch = 64;
    int epochs = 200;
    uint64_t seed = 7;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::string label_source = "pseudo";  // pseudo | truth
    double brightness_aug_lo = 0.02;
    double brightness_aug_hi = 1.0;
    int checkpoint_every_epochs = 50;
};

struct EvalConfig {
    double light_brightness = 1.0;
    double dark_brightness = 0.05;
};

struct ExperimentConfig {
    audio::SpectrogramConfig spectrogram;
    PatchConfig audio_patch;
    ModelConfig model;
    FemSettings fem;
    LossConfig losses;
    DbscanConfig dbscan;
    labeler::FilterRules filter;
    sim::SimConfig sim;
    TrainConfig train;
    EvalConfig eval;
};

ExperimentConfig default_config();

Json to_json(const ExperimentConfig& cfg);
Json sim_config_to_json(const sim::SimConfig& cfg);
sim::SimConfig sim_config_from_json(const Json& j);

// Strict parse: unknown keys raise ConfigError; missing keys keep defaults.
ExperimentConfig config_from_json(const Json& j);

// Reads a JSON file; // and /* */ comments are allowed.
ExperimentConfig load_config(const std::string& path);
Json load_json_file(const std::string& path);

// Restores the published training/model scale: lr 1e-4, batch 64, 200 epochs,
// 12 audio blocks, 6 heads, d_m = d_k = embed_dim = 192.
void apply_paper_scale(ExperimentConfig& cfg);

void validate_config(const ExperimentConfig& cfg);

}  // namespace avtrack::config
