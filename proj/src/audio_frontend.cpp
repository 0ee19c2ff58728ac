#include "avtrack/audio_frontend.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>

#include "avtrack/errors.hpp"

namespace avtrack::audio {

namespace {

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Triangular mel filterbank over the one-sided spectrum of frame_size bins.
// weights[m][k] for m in [0, mel_bins), k in [0, frame_size/2].
std::vector<std::vector<double>> build_filterbank(const SpectrogramConfig& cfg) {
    const int nbins = cfg.frame_size / 2 + 1;
    const double mel_lo = hz_to_mel(cfg.fmin_hz);
    const double mel_hi = hz_to_mel(std::min(cfg.fmax_hz, cfg.sample_rate / 2.0));
    std::vector<double> edges(cfg.mel_bins + 2);
    for (int i = 0; i < cfg.mel_bins + 2; ++i)
        edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.mel_bins + 1));

    std::vector<std::vector<double>> fb(cfg.mel_bins, std::vector<double>(nbins, 0.0));
    const double hz_per_bin = static_cast<double>(cfg.sample_rate) / cfg.frame_size;
    for (int m = 0; m < cfg.mel_bins; ++m) {
        const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
        for (int k = 0; k < nbins; ++k) {
            const double f = k * hz_per_bin;
            if (f <= lo || f >= hi) continue;
            fb[m][k] = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
        }
    }
    return fb;
}

// FFTW plans are cached per frame size; plan creation is serialized because
// the planner is not thread-safe, execution on private buffers is.
struct FftPlan {
    fftw_plan plan{};
    int n = 0;
};

FftPlan& plan_for(int n) {
    static std::mutex mu;
    static std::map<int, FftPlan> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    FftPlan p;
    p.n = n;
    std::vector<double> in(n, 0.0);
    std::vector<fftw_complex> out(n / 2 + 1);
    p.plan = fftw_plan_dft_r2c_1d(n, in.data(), out.data(), FFTW_ESTIMATE);
    return cache.emplace(n, p).first->second;
}

}  // namespace

double mel_bin_center_hz(const SpectrogramConfig& cfg, int bin) {
    const double mel_lo = hz_to_mel(cfg.fmin_hz);
    const double mel_hi = hz_to_mel(std::min(cfg.fmax_hz, cfg.sample_rate / 2.0));
    return mel_to_hz(mel_lo + (mel_hi - mel_lo) * (bin + 1) / (cfg.mel_bins + 1));
}

MelSpectrogram compute_melspectrogram(const AudioWindow& window, const SpectrogramConfig& cfg) {
    const int zeta = window.channels();
    const int T = window.length();
    if (zeta < 1) throw InputError("melspectrogram: no channels");
    for (const auto& ch : window.samples) {
        if (static_cast<int>(ch.size()) != T)
            throw InputError("melspectrogram: channel lengths differ");
        for (double s : ch)
            if (!std::isfinite(s)) throw InputError("melspectrogram: non-finite sample");
    }
    if (T < cfg.frame_size) throw InputError("melspectrogram: window shorter than one frame");
    if (cfg.hop * (cfg.frames - 1) + cfg.frame_size > T)
        throw InputError("melspectrogram: hop*(frames-1)+frame exceeds window length");

    const auto fb = build_filterbank(cfg);
    const int nbins = cfg.frame_size / 2 + 1;

    std::vector<double> hann(cfg.frame_size);
    for (int i = 0; i < cfg.frame_size; ++i)
        hann[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / (cfg.frame_size - 1));

    MelSpectrogram out;
    out.channels = zeta;
    out.frames = cfg.frames;
    out.bins = cfg.mel_bins;
    out.values.assign(static_cast<size_t>(zeta) * cfg.frames * cfg.mel_bins, 0.0);

    FftPlan& plan = plan_for(cfg.frame_size);
    std::vector<double> in(cfg.frame_size);
    std::vector<fftw_complex> spec(nbins);
    std::vector<double> power(nbins);

    for (int c = 0; c < zeta; ++c) {
        const auto& ch = window.samples[c];
        for (int r = 0; r < cfg.frames; ++r) {
            const int off = r * cfg.hop;
            for (int i = 0; i < cfg.frame_size; ++i) in[i] = ch[off + i] * hann[i];
            fftw_execute_dft_r2c(plan.plan, in.data(), spec.data());
            for (int k = 0; k < nbins; ++k)
                power[k] = spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1];
            for (int m = 0; m < cfg.mel_bins; ++m) {
                double e = 0.0;
                const auto& w = fb[m];
                for (int k = 0; k < nbins; ++k) e += w[k] * power[k];
                out.at(c, r, m) = std::log(std::max(e, cfg.log_floor));
            }
        }
    }
    return out;
}

PatchSequence split_patches(const MelSpectrogram& spec, PatchAxis axis, int w, int h) {
    PatchSequence seq;
    seq.axis = axis;
    const int zeta = spec.channels, R = spec.frames, S = spec.bins;
    if (axis == PatchAxis::temporal) {
        if (w < 1 || R % w != 0)
            throw ShapeError("split_patches: temporal width does not divide frame count");
        seq.count = R / w;
        seq.patch_dim = zeta * w * S;
        seq.patches = nn::Tensor(seq.count, seq.patch_dim);
        for (int j = 0; j < seq.count; ++j) {
            double* dst = seq.patches.row_ptr(j);
            size_t i = 0;
            for (int c = 0; c < zeta; ++c)
                for (int t = 0; t < w; ++t)
                    for (int s = 0; s < S; ++s) dst[i++] = spec.at(c, j * w + t, s);
        }
    } else {
        if (h < 1 || S % h != 0)
            throw ShapeError("split_patches: spectral height does not divide bin count");
        seq.count = S / h;
        seq.patch_dim = zeta * R * h;
        seq.patches = nn::Tensor(seq.count, seq.patch_dim);
        for (int j = 0; j < seq.count; ++j) {
            double* dst = seq.patches.row_ptr(j);
            size_t i = 0;
            for (int c = 0; c < zeta; ++c)
                for (int s = 0; s < h; ++s)
                    for (int t = 0; t < R; ++t) dst[i++] = spec.at(c, t, j * h + s);
        }
    }
    return seq;
}

MelSpectrogram reconstruct_patches(const PatchSequence& seq, int channels, int frames, int bins) {
    MelSpectrogram spec;
    spec.channels = channels;
    spec.frames = frames;
    spec.bins = bins;
    spec.values.assign(static_cast<size_t>(channels) * frames * bins, 0.0);
    if (seq.axis == PatchAxis::temporal) {
        const int w = frames / seq.count;
        if (seq.patch_dim != channels * w * bins)
            throw ShapeError("reconstruct_patches: temporal dims inconsistent");
        for (int j = 0; j < seq.count; ++j) {
            const double* src = seq.patches.row_ptr(j);
            size_t i = 0;
            for (int c = 0; c < channels; ++c)
                for (int t = 0; t < w; ++t)
                    for (int s = 0; s < bins; ++s) spec.at(c, j * w + t, s) = src[i++];
        }
    } else {
        const int h = bins / seq.count;
        if (seq.patch_dim != channels * frames * h)
            throw ShapeError("reconstruct_patches: spectral dims inconsistent");
        for (int j = 0; j < seq.count; ++j) {
            const double* src = seq.patches.row_ptr(j);
            size_t i = 0;
            for (int c = 0; c < channels; ++c)
                for (int s = 0; s < h; ++s)
                    for (int t = 0; t < frames; ++t) spec.at(c, t, j * h + s) = src[i++];
        }
    }
    return spec;
}

PatchEmbed::PatchEmbed(nn::ParamRegistry& reg, const std::string& prefix, int patch_dim_,
                       int seq_len, int dim_)
    : patch_dim(patch_dim_), dim(dim_) {
    proj = reg.add_randn(prefix + ".proj", patch_dim, dim, 1.0 / std::sqrt(patch_dim));
    token = reg.add_randn(prefix + ".token", 1, dim, 0.02);
    pos = reg.add_randn(prefix + ".pos", seq_len + 1, dim, 0.02);
}

nn::Var PatchEmbed::forward(const nn::Tensor& patches) const {
    return forward(nn::constant(patches));
}

nn::Var PatchEmbed::forward(const nn::Var& patches) const {
    if (patches->val.cols != patch_dim)
        throw ShapeError("patch embed: patch dim mismatch");
    if (patches->val.rows + 1 != pos->val.rows)
        throw ShapeError("patch embed: sequence length mismatch with positional table");
    auto projected = nn::matmul(patches, proj);
    auto stacked = nn::concat_rows({projected, token});
    return nn::add(stacked, pos);
}

}  // namespace avtrack::audio
