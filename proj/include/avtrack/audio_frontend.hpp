#pragma once

#include <vector>

#include "avtrack/params.hpp"
#include "avtrack/tensor.hpp"

namespace avtrack::audio {

// Multi-channel audio snippet. All channels share the same length and rate.
struct AudioWindow {
    int sample_rate = 48000;
    std::vector<std::vector<double>> samples;  // [channel][sample]

    int channels() const { return static_cast<int>(samples.size()); }
    int length() const { return samples.empty() ? 0 : static_cast<int>(samples[0].size()); }
    double duration() const { return static_cast<double>(length()) / sample_rate; }
};

struct SpectrogramConfig {
    int sample_rate = 48000;
    double window_seconds = 1.0;  // expected audio duration
    int frame_size = 1024;        // FFT length (power of two)
    int hop = 745;                // chosen so frames=64 fits a 1 s window
    int frames = 64;              // R
    int mel_bins = 64;            // S
    double fmin_hz = 50.0;
    double fmax_hz = 16000.0;
    double log_floor = 1e-10;     // energies are clamped here before log
};

// Log-mel energies, layout [channel][frame][bin].
struct MelSpectrogram {
    int channels = 0;  // zeta
    int frames = 0;    // R
    int bins = 0;      // S
    std::vector<double> values;

    double& at(int c, int r, int s) {
        return values[(static_cast<size_t>(c) * frames + r) * bins + s];
    }
    double at(int c, int r, int s) const {
        return values[(static_cast<size_t>(c) * frames + r) * bins + s];
    }
};

enum class PatchAxis { temporal, spectral };

// Flattened non-overlapping patches; row j = patch j.
// Temporal patches cover w frames x all bins, scanned left to right;
// spectral patches cover h bins x all frames, scanned top to bottom.
// Within a patch values are laid out channel-major, then along the patch's
// own axis, then along the full cross axis (documented in the README).
struct PatchSequence {
    PatchAxis axis = PatchAxis::temporal;
    int count = 0;      // J
    int patch_dim = 0;  // zeta*w*S or zeta*R*h
    nn::Tensor patches;
};

MelSpectrogram compute_melspectrogram(const AudioWindow& window, const SpectrogramConfig& cfg);

// Center frequency (Hz) of a mel filter; used by callers that probe the bank.
double mel_bin_center_hz(const SpectrogramConfig& cfg, int bin);

PatchSequence split_patches(const MelSpectrogram& spec, PatchAxis axis, int w, int h);

// Inverse of split_patches for a full set of patches of the same axis.
MelSpectrogram reconstruct_patches(const PatchSequence& seq, int channels, int frames, int bins);

// Linear patch projection with one trailing learnable token and an additive
// positional table covering all rows including the token row.
struct PatchEmbed {
    int patch_dim = 0;
    int dim = 0;  // D
    nn::Var proj;   // patch_dim x D
    nn::Var token;  // 1 x D
    nn::Var pos;    // (J+1) x D

    PatchEmbed() = default;
    PatchEmbed(nn::ParamRegistry& reg, const std::string& prefix, int patch_dim, int seq_len,
               int dim);

    // patches: J x patch_dim with J+1 == pos rows. Returns (J+1) x D.
    nn::Var forward(const nn::Tensor& patches) const;
    nn::Var forward(const nn::Var& patches) const;
};

}  // namespace avtrack::audio
