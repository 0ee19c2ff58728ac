#include "avtrack/sim.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "avtrack/arrayio.hpp"
#include "avtrack/config.hpp"
#include "avtrack/errors.hpp"
#include "avtrack/rng.hpp"

namespace avtrack::sim {

namespace fs = std::filesystem;

SimConfig default_sim_config() {
    SimConfig c;
    c.classes = {
        {"quad_small", 220.0, 6, 0.75, 0.30, {1.00, 0.35, 0.35}},
        {"quad_large", 300.0, 6, 0.65, 0.45, {0.35, 1.00, 0.40}},
        {"hex", 410.0, 5, 0.80, 0.60, {0.40, 0.55, 1.00}},
        {"fixed_wing", 560.0, 5, 0.55, 0.75, {1.00, 1.00, 0.45}},
    };
    return c;
}

std::vector<Microphone> default_mic_array(double spacing) {
    // Four capsules at the corners of a square, each tilted 45 degrees
    // outward along its diagonal so channel gains encode source direction.
    const double h = spacing / 2.0;
    const double a = 0.5, b = 1.0 / std::sqrt(2.0);
    return {
        {{+h, +h, 0.05}, {+a, +a, b}},
        {{-h, +h, 0.05}, {-a, +a, b}},
        {{-h, -h, 0.05}, {-a, -a, b}},
        {{+h, -h, 0.05}, {+a, -a, b}},
    };
}

CameraModel make_camera(int image_size, double fov_deg) {
    CameraModel cam;
    cam.width = cam.height = image_size;
    const double f = (image_size / 2.0) / std::tan(fov_deg * M_PI / 360.0);
    cam.fx = cam.fy = f;
    cam.cx = image_size / 2.0;
    cam.cy = image_size / 2.0;
    return cam;
}

Projection project_point(const CameraModel& cam, const std::array<double, 3>& p) {
    Projection out;
    // Camera at the origin looking straight up (+z).
    if (p[2] <= cam.z_near) return out;
    out.u = cam.fx * p[0] / p[2] + cam.cx;
    out.v = cam.fy * p[1] / p[2] + cam.cy;
    out.in_frustum = out.u >= 0.0 && out.u < cam.width && out.v >= 0.0 && out.v < cam.height;
    return out;
}

Trajectory make_trajectory(const SimConfig& cfg, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    Trajectory t;
    const double R = cfg.hemisphere_radius;
    t.z0 = cfg.min_height + 0.8 + u01(rng) * (0.55 * R - cfg.min_height - 0.8);
    t.az = 0.2 + u01(rng) * std::min(1.5, t.z0 - cfg.min_height - 0.1);
    const double zmax = t.z0 + t.az;
    const double rho_cap = 0.92 * std::sqrt(std::max(0.05, R * R - zmax * zmax));
    t.rho_x = (0.25 + 0.65 * u01(rng)) * rho_cap;
    t.rho_y = (0.25 + 0.65 * u01(rng)) * rho_cap * std::sqrt(
                  std::max(0.0, 1.0 - (t.rho_x / rho_cap) * (t.rho_x / rho_cap)));
    t.rho_y = std::max(t.rho_y, 0.15 * rho_cap);
    t.w1 = 0.15 + 0.35 * u01(rng);
    t.w2 = 0.15 + 0.35 * u01(rng);
    t.w3 = 0.10 + 0.30 * u01(rng);
    t.p1 = 2.0 * M_PI * u01(rng);
    t.p2 = 2.0 * M_PI * u01(rng);
    t.p3 = 2.0 * M_PI * u01(rng);
    return t;
}

audio::AudioWindow synth_audio(const std::array<double, 3>& pos, const ClassSpec& cls,
                               const std::vector<Microphone>& mics, const SimConfig& cfg,
                               std::mt19937_64& rng) {
    if (mics.size() < 2) throw ConfigError("synth_audio: need at least two microphones");
    const auto& sp = cfg.spectrogram;
    const int n = static_cast<int>(sp.window_seconds * sp.sample_rate + 0.5);
    audio::AudioWindow w;
    w.sample_rate = sp.sample_rate;
    w.samples.assign(mics.size(), std::vector<double>(n, 0.0));

    std::uniform_real_distribution<double> uph(0.0, 2.0 * M_PI);
    std::vector<double> amp(cls.harmonics), phase(cls.harmonics);
    double comb_power = 0.0;
    for (int k = 0; k < cls.harmonics; ++k) {
        amp[k] = std::pow(cls.harmonic_decay, k);
        phase[k] = uph(rng);
        comb_power += amp[k] * amp[k] / 2.0;
    }
    const double comb_rms = std::sqrt(comb_power);
    // Noise floor fixed by the SNR of a reference source at half range.
    const double ref_rms =
        cfg.source_amplitude * comb_rms / std::max(0.5, cfg.hemisphere_radius / 2.0);
    const double noise_sd = ref_rms * std::pow(10.0, -cfg.snr_db / 20.0);
    std::normal_distribution<double> noise(0.0, noise_sd);

    for (size_t m = 0; m < mics.size(); ++m) {
        const auto& mic = mics[m];
        const double dx = pos[0] - mic.position[0];
        const double dy = pos[1] - mic.position[1];
        const double dz = pos[2] - mic.position[2];
        const double r = std::max(0.1, std::sqrt(dx * dx + dy * dy + dz * dz));
        const double tau = r / cfg.speed_of_sound;
        const double cosang =
            (dx * mic.axis[0] + dy * mic.axis[1] + dz * mic.axis[2]) / r;
        const double dir_gain =
            (1.0 - cfg.mic_directivity) + cfg.mic_directivity * (0.5 + 0.5 * cosang);
        const double gain = cfg.source_amplitude * dir_gain / r;
        auto& ch = w.samples[m];
        for (int i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / sp.sample_rate - tau;
            double s = 0.0;
            for (int k = 0; k < cls.harmonics; ++k)
                s += amp[k] * std::sin(2.0 * M_PI * cls.fundamental_hz * (k + 1) * t + phase[k]);
            ch[i] = gain * s + noise(rng);
        }
    }
    return w;
}

vision::ImageFrame synth_image(const std::array<double, 3>& pos, const ClassSpec& cls,
                               const CameraModel& cam, double brightness,
                               std::mt19937_64& rng) {
    vision::ImageFrame img;
    img.height = cam.height;
    img.width = cam.width;
    img.pixels.assign(static_cast<size_t>(3) * cam.height * cam.width, 0.0);

    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double phx = 2.0 * M_PI * u01(rng), phy = 2.0 * M_PI * u01(rng);
    const double fx1 = 1.0 + 2.0 * u01(rng), fy1 = 1.0 + 2.0 * u01(rng);
    std::normal_distribution<double> pix_noise(0.0, 0.02);

    // Low-frequency sky texture, slightly different per channel.
    for (int c = 0; c < 3; ++c) {
        const double chan_gain = 0.16 + 0.02 * c;
        for (int y = 0; y < cam.height; ++y) {
            for (int x = 0; x < cam.width; ++x) {
                const double tx = std::sin(2.0 * M_PI * fx1 * x / cam.width + phx);
                const double ty = std::sin(2.0 * M_PI * fy1 * y / cam.height + phy);
                img.at(c, y, x) = chan_gain + 0.06 * tx * ty + pix_noise(rng);
            }
        }
    }

    const Projection pr = project_point(cam, pos);
    if (pos[2] > cam.z_near) {
        const double sigma =
            std::clamp(cam.fx * cls.body_size_m / pos[2] * 0.35, 0.8, 10.0);
        if (pr.u > -3.0 * sigma && pr.u < cam.width + 3.0 * sigma && pr.v > -3.0 * sigma &&
            pr.v < cam.height + 3.0 * sigma) {
            const int x0 = std::max(0, static_cast<int>(pr.u - 3.0 * sigma));
            const int x1 = std::min(cam.width - 1, static_cast<int>(pr.u + 3.0 * sigma));
            const int y0 = std::max(0, static_cast<int>(pr.v - 3.0 * sigma));
            const int y1 = std::min(cam.height - 1, static_cast<int>(pr.v + 3.0 * sigma));
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    const double d2 = (x - pr.u) * (x - pr.u) + (y - pr.v) * (y - pr.v);
                    const double g = 0.85 * std::exp(-d2 / (2.0 * sigma * sigma));
                    for (int c = 0; c < 3; ++c) img.at(c, y, x) += cls.tint[c] * g;
                }
            }
        }
    }

    // Clamp first so the brightness factor scales mean intensity exactly.
    for (double& p : img.pixels) p = std::clamp(p, 0.0, 1.0) * brightness;
    return img;
}

labeler::PointCloud synth_lidar(const std::array<double, 3>& pos, const ClassSpec& cls,
                                const SimConfig& cfg, double timestamp, std::mt19937_64& rng) {
    labeler::PointCloud cloud;
    cloud.timestamp = timestamp;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> jitter(0.0, cfg.lidar_noise_sigma);

    const double r = std::max(0.5, std::sqrt(pos[0] * pos[0] + pos[1] * pos[1] +
                                             pos[2] * pos[2]));
    const int n_body = std::min(
        cfg.lidar_max_points,
        static_cast<int>(cfg.lidar_density * cfg.lidar_drone_gain / (r * r) + 0.5));

    // Box faces sampled proportionally to area.
    const double hx = cls.body_size_m * 0.5, hy = cls.body_size_m * 0.5,
                 hz = cls.body_size_m * 0.3;
    const double areas[3] = {hy * hz, hx * hz, hx * hy};  // x-, y-, z-normal faces
    const double total = 2.0 * (areas[0] + areas[1] + areas[2]);
    for (int i = 0; i < n_body; ++i) {
        double pick = u01(rng) * total;
        int axis = 0;
        for (; axis < 3; ++axis) {
            if (pick < 2.0 * areas[axis]) break;
            pick -= 2.0 * areas[axis];
        }
        if (axis > 2) axis = 2;
        const double side = (pick < areas[axis]) ? -1.0 : 1.0;
        std::array<double, 3> p{(2.0 * u01(rng) - 1.0) * hx, (2.0 * u01(rng) - 1.0) * hy,
                                (2.0 * u01(rng) - 1.0) * hz};
        p[axis] = side * (axis == 0 ? hx : axis == 1 ? hy : hz);
        cloud.points.push_back({pos[0] + p[0] + jitter(rng), pos[1] + p[1] + jitter(rng),
                                pos[2] + p[2] + jitter(rng)});
    }

    // Sparse uniform clutter in the sensing hemisphere.
    for (int i = 0; i < cfg.lidar_clutter_points; ++i) {
        while (true) {
            const double x = (2.0 * u01(rng) - 1.0) * cfg.hemisphere_radius;
            const double y = (2.0 * u01(rng) - 1.0) * cfg.hemisphere_radius;
            const double z = u01(rng) * cfg.hemisphere_radius;
            if (x * x + y * y + z * z <= cfg.hemisphere_radius * cfg.hemisphere_radius) {
                cloud.points.push_back({x, y, z});
                break;
            }
        }
    }
    return cloud;
}

FrameSample synth_frame(const SimConfig& cfg, const Trajectory& traj, int class_id,
                        int scene_index, int frame_index, uint64_t seed) {
    if (class_id < 0 || class_id >= static_cast<int>(cfg.classes.size()))
        throw ConfigError("synth_frame: class id out of range");
    const ClassSpec& cls = cfg.classes[class_id];
    const double t = frame_index / cfg.fps;
    const auto pos = traj.at(t);

    FrameSample fr;
    fr.timestamp = t;
    auto rng_a = substream(seed, "audio", scene_index, frame_index);
    fr.audio = synth_audio(pos, cls, default_mic_array(cfg.mic_spacing), cfg, rng_a);
    const CameraModel cam = make_camera(cfg.image_size, cfg.fov_deg);
    auto rng_i = substream(seed, "image", scene_index, frame_index);
    fr.image = synth_image(pos, cls, cam, cfg.brightness, rng_i);
    fr.image.timestamp = t;
    auto rng_l = substream(seed, "lidar", scene_index, frame_index);
    fr.cloud = synth_lidar(pos, cls, cfg, t, rng_l);

    const Projection pr = project_point(cam, pos);
    fr.truth.position = pos;
    fr.truth.class_id = class_id;
    fr.truth.in_frustum = pr.in_frustum ? 1 : 0;
    fr.truth.visible = (pr.in_frustum && cfg.brightness >= cfg.visibility_floor) ? 1 : 0;
    fr.truth.center_u = pr.in_frustum ? pr.u / cam.width : 0.0;
    fr.truth.center_v = pr.in_frustum ? pr.v / cam.height : 0.0;
    fr.truth.brightness = cfg.brightness;
    return fr;
}

namespace {

std::string frame_stem(int frame) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%04d", frame);
    return buf;
}

std::string scene_dir_name(int scene) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "scene_%03d", scene);
    return buf;
}

}  // namespace

DatasetSummary generate_dataset(const SimConfig& cfg, uint64_t seed, const std::string& out_dir) {
    if (cfg.scenes < 1 || cfg.frames_per_scene < 1)
        throw ConfigError("generate_dataset: need at least one scene and frame");
    fs::create_directories(out_dir);

    const int train_scenes =
        static_cast<int>(cfg.train_fraction * cfg.scenes + 0.5);

    config::Json manifest;
    manifest["dataset_version"] = 1;
    manifest["seed"] = seed;
    manifest["config"] = config::sim_config_to_json(cfg);
    config::Json scenes = config::Json::array();

    DatasetSummary summary;
    summary.scenes = cfg.scenes;
    for (int s = 0; s < cfg.scenes; ++s) {
        auto rng_t = substream(seed, "traj", s);
        const Trajectory traj = make_trajectory(cfg, rng_t);
        const int class_id = s % static_cast<int>(cfg.classes.size());
        const std::string split = s < train_scenes ? "train" : "test";
        const std::string sdir = scene_dir_name(s);
        fs::create_directories(fs::path(out_dir) / sdir);

        config::Json sj;
        sj["id"] = s;
        sj["split"] = split;
        sj["class_id"] = class_id;
        config::Json frames = config::Json::array();
        for (int f = 0; f < cfg.frames_per_scene; ++f) {
            FrameSample fr = synth_frame(cfg, traj, class_id, s, f, seed);

            const std::string stem = sdir + "/" + frame_stem(f);
            {
                io::NdArray a;
                a.dtype = io::Dtype::f32;
                a.dims = {static_cast<uint32_t>(fr.audio.channels()),
                          static_cast<uint32_t>(fr.audio.length())};
                a.data.reserve(a.count());
                for (const auto& ch : fr.audio.samples)
                    a.data.insert(a.data.end(), ch.begin(), ch.end());
                io::write_array((fs::path(out_dir) / (stem + ".audio.arr")).string(), a);
            }
            {
                io::NdArray a;
                a.dtype = io::Dtype::f32;
                a.dims = {3, static_cast<uint32_t>(fr.image.height),
                          static_cast<uint32_t>(fr.image.width)};
                a.data = fr.image.pixels;
                io::write_array((fs::path(out_dir) / (stem + ".image.arr")).string(), a);
            }
            {
                io::NdArray a;
                a.dtype = io::Dtype::f32;
                a.dims = {static_cast<uint32_t>(fr.cloud.points.size()), 3};
                a.data.reserve(a.count());
                for (const auto& p : fr.cloud.points)
                    a.data.insert(a.data.end(), p.begin(), p.end());
                io::write_array((fs::path(out_dir) / (stem + ".cloud.arr")).string(), a);
            }

            config::Json fj;
            fj["t"] = fr.timestamp;
            fj["audio"] = stem + ".audio.arr";
            fj["image"] = stem + ".image.arr";
            fj["cloud"] = stem + ".cloud.arr";
            fj["truth"] = {{"pos", {fr.truth.position[0], fr.truth.position[1],
                                    fr.truth.position[2]}},
                           {"class_id", fr.truth.class_id},
                           {"in_frustum", fr.truth.in_frustum},
                           {"visible", fr.truth.visible},
                           {"center_uv", {fr.truth.center_u, fr.truth.center_v}},
                           {"brightness", fr.truth.brightness}};
            frames.push_back(fj);
            ++summary.frames;
            if (split == "train")
                ++summary.train_frames;
            else
                ++summary.test_frames;
        }
        sj["frames"] = frames;
        scenes.push_back(sj);
    }
    manifest["scenes"] = scenes;

    std::ofstream mf(fs::path(out_dir) / "manifest.json");
    if (!mf) throw IoError("cannot write manifest in " + out_dir);
    mf << manifest.dump(1) << '\n';
    return summary;
}

}  // namespace avtrack::sim
