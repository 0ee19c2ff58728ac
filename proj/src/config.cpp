#include "avtrack/config.hpp"

#include <fstream>
#include <set>

#include "avtrack/errors.hpp"

namespace avtrack::config {

namespace {

void check_keys(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

template <class T>
void read_field(const Json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        j.at(key).get_to(out);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

}  // namespace

ExperimentConfig default_config() {
    ExperimentConfig cfg;
    cfg.sim = sim::default_sim_config();
    cfg.sim.spectrogram = cfg.spectrogram;
    return cfg;
}

Json sim_config_to_json(const sim::SimConfig& c) {
    Json j;
    j["scenes"] = c.scenes;
    j["frames_per_scene"] = c.frames_per_scene;
    j["fps"] = c.fps;
    j["hemisphere_radius"] = c.hemisphere_radius;
    j["min_height"] = c.min_height;
    j["mic_spacing"] = c.mic_spacing;
    j["mic_directivity"] = c.mic_directivity;
    j["snr_db"] = c.snr_db;
    j["source_amplitude"] = c.source_amplitude;
    j["speed_of_sound"] = c.speed_of_sound;
    j["image_size"] = c.image_size;
    j["fov_deg"] = c.fov_deg;
    j["brightness"] = c.brightness;
    j["visibility_floor"] = c.visibility_floor;
    j["lidar_density"] = c.lidar_density;
    j["lidar_max_points"] = c.lidar_max_points;
    j["lidar_noise_sigma"] = c.lidar_noise_sigma;
    j["lidar_clutter_points"] = c.lidar_clutter_points;
    j["lidar_drone_gain"] = c.lidar_drone_gain;
    j["train_fraction"] = c.train_fraction;
    Json classes = Json::array();
    for (const auto& k : c.classes) {
        Json cj;
        cj["name"] = k.name;
        cj["fundamental_hz"] = k.fundamental_hz;
        cj["harmonics"] = k.harmonics;
        cj["harmonic_decay"] = k.harmonic_decay;
        cj["body_size_m"] = k.body_size_m;
        cj["tint"] = {k.tint[0], k.tint[1], k.tint[2]};
        classes.push_back(cj);
    }
    j["classes"] = classes;
    return j;
}

sim::SimConfig sim_config_from_json(const Json& j) {
    sim::SimConfig c = sim::default_sim_config();
    check_keys(j,
               {"scenes", "frames_per_scene", "fps", "hemisphere_radius", "min_height",
                "mic_spacing", "mic_directivity", "snr_db", "source_amplitude",
                "speed_of_sound", "image_size", "fov_deg", "brightness", "visibility_floor",
                "lidar_density", "lidar_max_points", "lidar_noise_sigma",
                "lidar_clutter_points", "lidar_drone_gain", "train_fraction", "classes"},
               "sim");
    read_field(j, "scenes", c.scenes, "sim");
    read_field(j, "frames_per_scene", c.frames_per_scene, "sim");
    read_field(j, "fps", c.fps, "sim");
    read_field(j, "hemisphere_radius", c.hemisphere_radius, "sim");
    read_field(j, "min_height", c.min_height, "sim");
    read_field(j, "mic_spacing", c.mic_spacing, "sim");
    read_field(j, "mic_directivity", c.mic_directivity, "sim");
    read_field(j, "snr_db", c.snr_db, "sim");
    read_field(j, "source_amplitude", c.source_amplitude, "sim");
    read_field(j, "speed_of_sound", c.speed_of_sound, "sim");
    read_field(j, "image_size", c.image_size, "sim");
    read_field(j, "fov_deg", c.fov_deg, "sim");
    read_field(j, "brightness", c.brightness, "sim");
    read_field(j, "visibility_floor", c.visibility_floor, "sim");
    read_field(j, "lidar_density", c.lidar_density, "sim");
    read_field(j, "lidar_max_points", c.lidar_max_points, "sim");
    read_field(j, "lidar_noise_sigma", c.lidar_noise_sigma, "sim");
    read_field(j, "lidar_clutter_points", c.lidar_clutter_points, "sim");
    read_field(j, "lidar_drone_gain", c.lidar_drone_gain, "sim");
    read_field(j, "train_fraction", c.train_fraction, "sim");
    if (j.contains("classes")) {
        c.classes.clear();
        for (const auto& cj : j.at("classes")) {
            check_keys(cj,
                       {"name", "fundamental_hz", "harmonics", "harmonic_decay", "body_size_m",
                        "tint"},
                       "sim.classes[]");
            sim::ClassSpec k;
            read_field(cj, "name", k.name, "sim.classes[]");
            read_field(cj, "fundamental_hz", k.fundamental_hz, "sim.classes[]");
            read_field(cj, "harmonics", k.harmonics, "sim.classes[]");
            read_field(cj, "harmonic_decay", k.harmonic_decay, "sim.classes[]");
            read_field(cj, "body_size_m", k.body_size_m, "sim.classes[]");
            if (cj.contains("tint")) {
                auto t = cj.at("tint");
                if (!t.is_array() || t.size() != 3)
                    throw ConfigError("sim.classes[].tint: expected [r,g,b]");
                for (int i = 0; i < 3; ++i) k.tint[i] = t[i].get<double>();
            }
            c.classes.push_back(k);
        }
    }
    return c;
}

Json to_json(const ExperimentConfig& c) {
    Json j;
    {
        Json s;
        s["sample_rate"] = c.spectrogram.sample_rate;
        s["window_seconds"] = c.spectrogram.window_seconds;
        s["frame_size"] = c.spectrogram.frame_size;
        s["hop"] = c.spectrogram.hop;
        s["frames"] = c.spectrogram.frames;
        s["mel_bins"] = c.spectrogram.mel_bins;
        s["fmin_hz"] = c.spectrogram.fmin_hz;
        s["fmax_hz"] = c.spectrogram.fmax_hz;
        s["log_floor"] = c.spectrogram.log_floor;
        j["spectrogram"] = s;
    }
    j["audio_patch"] = {{"w", c.audio_patch.w}, {"h", c.audio_patch.h}};
    {
        Json m;
        m["variant"] = c.model.variant;
        m["embed_dim"] = c.model.embed_dim;
        m["state_dim"] = c.model.state_dim;
        m["depth"] = c.model.depth;
        m["conv_kernel"] = c.model.conv_kernel;
        m["expansion"] = c.model.expansion;
        m["discretization"] = c.model.discretization;
        m["vision_depth"] = c.model.vision_depth;
        m["image_size"] = c.model.image_size;
        m["image_patch"] = c.model.image_patch;
        m["num_classes"] = c.model.num_classes;
        m["head_hidden"] = c.model.head_hidden;
        m["aam_outer_residual"] = c.model.aam_outer_residual;
        m["alpha_source"] = c.model.alpha_source;
        m["alpha_fixed"] = c.model.alpha_fixed;
        j["model"] = m;
    }
    j["fem"] = {{"heads", c.fem.heads}, {"d_m", c.fem.d_m}, {"d_k", c.fem.d_k}};
    j["losses"] = {{"gamma1", c.losses.gamma1},
                   {"gamma2", c.losses.gamma2},
                   {"prob_floor", c.losses.prob_floor}};
    j["dbscan"] = {{"eps", c.dbscan.eps}, {"min_pts", c.dbscan.min_pts}};
    j["filter"] = {{"c_min", c.filter.c_min},
                   {"c_max", c.filter.c_max},
                   {"e_max", c.filter.e_max},
                   {"d_max", c.filter.d_max},
                   {"m_min", c.filter.m_min}};
    j["sim"] = sim_config_to_json(c.sim);
    {
        Json t;
        t["lr"] = c.train.lr;
        t["batch"] = c.train.batch;
        t["epochs"] = c.train.epochs;
        t["seed"] = c.train.seed;
        t["beta1"] = c.train.beta1;
        t["beta2"] = c.train.beta2;
        t["adam_eps"] = c.train.adam_eps;
        t["label_source"] = c.train.label_source;
        t["brightness_aug_lo"] = c.train.brightness_aug_lo;
        t["brightness_aug_hi"] = c.train.brightness_aug_hi;
        t["checkpoint_every_epochs"] = c.train.checkpoint_every_epochs;
        j["train"] = t;
    }
    j["eval"] = {{"light_brightness", c.eval.light_brightness},
                 {"dark_brightness", c.eval.dark_brightness}};
    return j;
}

ExperimentConfig config_from_json(const Json& j) {
    ExperimentConfig c = default_config();
    check_keys(j,
               {"spectrogram", "audio_patch", "model", "fem", "losses", "dbscan", "filter",
                "sim", "train", "eval"},
               "config");
    if (j.contains("spectrogram")) {
        const auto& s = j.at("spectrogram");
        check_keys(s,
                   {"sample_rate", "window_seconds", "frame_size", "hop", "frames", "mel_bins",
                    "fmin_hz", "fmax_hz", "log_floor"},
                   "spectrogram");
        read_field(s, "sample_rate", c.spectrogram.sample_rate, "spectrogram");
        read_field(s, "window_seconds", c.spectrogram.window_seconds, "spectrogram");
        read_field(s, "frame_size", c.spectrogram.frame_size, "spectrogram");
        read_field(s, "hop", c.spectrogram.hop, "spectrogram");
        read_field(s, "frames", c.spectrogram.frames, "spectrogram");
        read_field(s, "mel_bins", c.spectrogram.mel_bins, "spectrogram");
        read_field(s, "fmin_hz", c.spectrogram.fmin_hz, "spectrogram");
        read_field(s, "fmax_hz", c.spectrogram.fmax_hz, "spectrogram");
        read_field(s, "log_floor", c.spectrogram.log_floor, "spectrogram");
    }
    if (j.contains("audio_patch")) {
        const auto& s = j.at("audio_patch");
        check_keys(s, {"w", "h"}, "audio_patch");
        read_field(s, "w", c.audio_patch.w, "audio_patch");
        read_field(s, "h", c.audio_patch.h, "audio_patch");
    }
    if (j.contains("model")) {
        const auto& m = j.at("model");
        check_keys(m,
                   {"variant", "embed_dim", "state_dim", "depth", "conv_kernel", "expansion",
                    "discretization", "vision_depth", "image_size", "image_patch",
                    "num_classes", "head_hidden", "aam_outer_residual", "alpha_source",
                    "alpha_fixed"},
                   "model");
        read_field(m, "variant", c.model.variant, "model");
        read_field(m, "embed_dim", c.model.embed_dim, "model");
        read_field(m, "state_dim", c.model.state_dim, "model");
        read_field(m, "depth", c.model.depth, "model");
        read_field(m, "conv_kernel", c.model.conv_kernel, "model");
        read_field(m, "expansion", c.model.expansion, "model");
        read_field(m, "discretization", c.model.discretization, "model");
        read_field(m, "vision_depth", c.model.vision_depth, "model");
        read_field(m, "image_size", c.model.image_size, "model");
        read_field(m, "image_patch", c.model.image_patch, "model");
        read_field(m, "num_classes", c.model.num_classes, "model");
        read_field(m, "head_hidden", c.model.head_hidden, "model");
        read_field(m, "aam_outer_residual", c.model.aam_outer_residual, "model");
        read_field(m, "alpha_source", c.model.alpha_source, "model");
        read_field(m, "alpha_fixed", c.model.alpha_fixed, "model");
    }
    if (j.contains("fem")) {
        const auto& f = j.at("fem");
        check_keys(f, {"heads", "d_m", "d_k"}, "fem");
        read_field(f, "heads", c.fem.heads, "fem");
        read_field(f, "d_m", c.fem.d_m, "fem");
        read_field(f, "d_k", c.fem.d_k, "fem");
    }
    if (j.contains("losses")) {
        const auto& l = j.at("losses");
        check_keys(l, {"gamma1", "gamma2", "prob_floor"}, "losses");
        read_field(l, "gamma1", c.losses.gamma1, "losses");
        read_field(l, "gamma2", c.losses.gamma2, "losses");
        read_field(l, "prob_floor", c.losses.prob_floor, "losses");
    }
    if (j.contains("dbscan")) {
        const auto& d = j.at("dbscan");
        check_keys(d, {"eps", "min_pts"}, "dbscan");
        read_field(d, "eps", c.dbscan.eps, "dbscan");
        read_field(d, "min_pts", c.dbscan.min_pts, "dbscan");
    }
    if (j.contains("filter")) {
        const auto& f = j.at("filter");
        check_keys(f, {"c_min", "c_max", "e_max", "d_max", "m_min"}, "filter");
        read_field(f, "c_min", c.filter.c_min, "filter");
        read_field(f, "c_max", c.filter.c_max, "filter");
        read_field(f, "e_max", c.filter.e_max, "filter");
        read_field(f, "d_max", c.filter.d_max, "filter");
        read_field(f, "m_min", c.filter.m_min, "filter");
    }
    if (j.contains("sim")) c.sim = sim_config_from_json(j.at("sim"));
    c.sim.spectrogram = c.spectrogram;
    if (j.contains("train")) {
        const auto& t = j.at("train");
        check_keys(t,
                   {"lr", "batch", "epochs", "seed", "beta1", "beta2", "adam_eps",
                    "label_source", "brightness_aug_lo", "brightness_aug_hi",
                    "checkpoint_every_epochs"},
                   "train");
        read_field(t, "lr", c.train.lr, "train");
        read_field(t, "batch", c.train.batch, "train");
        read_field(t, "epochs", c.train.epochs, "train");
        read_field(t, "seed", c.train.seed, "train");
        read_field(t, "beta1", c.train.beta1, "train");
        read_field(t, "beta2", c.train.beta2, "train");
        read_field(t, "adam_eps", c.train.adam_eps, "train");
        read_field(t, "label_source", c.train.label_source, "train");
        read_field(t, "brightness_aug_lo", c.train.brightness_aug_lo, "train");
        read_field(t, "brightness_aug_hi", c.train.brightness_aug_hi, "train");
        read_field(t, "checkpoint_every_epochs", c.train.checkpoint_every_epochs, "train");
    }
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        check_keys(e, {"light_brightness", "dark_brightness"}, "eval");
        read_field(e, "light_brightness", c.eval.light_brightness, "eval");
        read_field(e, "dark_brightness", c.eval.dark_brightness, "eval");
    }
    validate_config(c);
    return c;
}

Json load_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    try {
        return Json::parse(f, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse error in ") + path + ": " + e.what());
    }
}

ExperimentConfig load_config(const std::string& path) {
    return config_from_json(load_json_file(path));
}

void apply_paper_scale(ExperimentConfig& c) {
    c.train.lr = 1e-4;
    c.train.batch = 64;
    c.train.epochs = 200;
    c.model.depth = 12;
    c.model.embed_dim = 192;
    c.fem.heads = 6;
    c.fem.d_m = 192;
    c.fem.d_k = 192;
}

void validate_config(const ExperimentConfig& c) {
    static const std::set<std::string> variants = {
        "audio_t", "audio_s", "audio_concat", "audio_fem", "visual", "av_concat", "full"};
    if (!variants.count(c.model.variant))
        throw ConfigError("model.variant: unknown variant '" + c.model.variant + "'");
    if (c.model.discretization != "zoh" && c.model.discretization != "euler")
        throw ConfigError("model.discretization must be 'zoh' or 'euler'");
    if (c.model.alpha_source != "student" && c.model.alpha_source != "teacher" &&
        c.model.alpha_source != "fixed")
        throw ConfigError("model.alpha_source must be student|teacher|fixed");
    if (c.model.embed_dim != c.fem.d_m)
        throw ConfigError("fem.d_m must equal model.embed_dim (fusion runs on audio tokens)");
    if (c.fem.d_k % c.fem.heads != 0) throw ConfigError("fem.heads must divide fem.d_k");
    if (c.spectrogram.frames % c.audio_patch.w != 0)
        throw ConfigError("audio_patch.w must divide spectrogram.frames");
    if (c.spectrogram.mel_bins % c.audio_patch.h != 0)
        throw ConfigError("audio_patch.h must divide spectrogram.mel_bins");
    if (c.model.image_size % c.model.image_patch != 0)
        throw ConfigError("model.image_patch must divide model.image_size");
    if (!(c.train.lr > 0)) throw ConfigError("train.lr must be positive");
    if (c.train.batch < 1) throw ConfigError("train.batch must be >= 1");
    if (c.train.label_source != "pseudo" && c.train.label_source != "truth")
        throw ConfigError("train.label_source must be pseudo|truth");
    if (!(c.dbscan.eps > 0)) throw ConfigError("dbscan.eps must be positive");
    if (c.dbscan.min_pts < 1) throw ConfigError("dbscan.min_pts must be >= 1");
    if (c.sim.classes.empty()) throw ConfigError("sim.classes must not be empty");
    if (!(c.train.brightness_aug_lo > 0) ||
        c.train.brightness_aug_hi < c.train.brightness_aug_lo ||
        c.train.brightness_aug_hi > 1.0)
        throw ConfigError("train brightness augmentation range must satisfy 0 < lo <= hi <= 1");
    const int hop_span = c.spectrogram.hop * (c.spectrogram.frames - 1) + c.spectrogram.frame_size;
    const int samples =
        static_cast<int>(c.spectrogram.window_seconds * c.spectrogram.sample_rate + 0.5);
    if (hop_span > samples)
        throw ConfigError("spectrogram: hop*(frames-1)+frame_size exceeds the audio window");
}

}  // namespace avtrack::config
