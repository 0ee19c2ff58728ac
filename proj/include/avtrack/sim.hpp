#pragma once

#include <array>
#include <random>
#include <string>
#include <vector>

#include "avtrack/audio_frontend.hpp"
#include "avtrack/pseudo_label.hpp"
#include "avtrack/vision.hpp"

namespace avtrack::sim {

struct ClassSpec {
    std::string name;
    double fundamental_hz = 220.0;
    int harmonics = 6;
    double harmonic_decay = 0.7;  // amplitude ratio between successive harmonics
    double body_size_m = 0.4;     // drives blob size and LiDAR box
    std::array<double, 3> tint{1.0, 1.0, 1.0};
};

struct Microphone {
    std::array<double, 3> position{};
    std::array<double, 3> axis{0.0, 0.0, 1.0};  // capsule facing direction
};

struct CameraModel {
    int width = 64, height = 64;
    double fx = 32.0, fy = 32.0, cx = 32.0, cy = 32.0;
    double z_near = 0.3;
};

struct SimConfig {
    int scenes = 10;
    int frames_per_scene = 100;
    double fps = 10.0;
    double hemisphere_radius = 8.0;  // sensing range, meters
    double min_height = 1.0;
    double mic_spacing = 0.5;      // square array edge
    double mic_directivity = 1.0;  // 0 = omni, 1 = cardioid capsules
    double snr_db = 25.0;
    double source_amplitude = 1.0;
    double speed_of_sound = 343.0;
    int image_size = 64;
    double fov_deg = 90.0;
    double brightness = 1.0;         // rendering brightness of stored images
    double visibility_floor = 0.1;   // below this brightness the teacher says "absent"
    double lidar_density = 600.0;    // drone returns at 1 m, falls off as 1/r^2
    int lidar_max_points = 80;
    double lidar_noise_sigma = 0.03;
    int lidar_clutter_points = 15;
    double lidar_drone_gain = 1.0;  // 0 disables drone returns (clutter-only clouds)
    double train_fraction = 0.7;
    std::vector<ClassSpec> classes;
    audio::SpectrogramConfig spectrogram;  // also fixes audio rate and duration
};

SimConfig default_sim_config();

struct Truth {
    std::array<double, 3> position{};
    int class_id = 0;
    int in_frustum = 0;  // geometric test only
    int visible = 0;     // in_frustum && brightness >= visibility_floor
    double center_u = 0.0, center_v = 0.0;  // normalized [0,1]
    double brightness = 1.0;
};

// One synchronized multi-sensor observation.
struct FrameSample {
    double timestamp = 0.0;
    audio::AudioWindow audio;
    vision::ImageFrame image;
    labeler::PointCloud cloud;
    Truth truth;
};

std::vector<Microphone> default_mic_array(double spacing);
CameraModel make_camera(int image_size, double fov_deg);

struct Projection {
    double u = 0.0, v = 0.0;  // pixels
    bool in_frustum = false;
};
Projection project_point(const CameraModel& cam, const std::array<double, 3>& p);

// Smooth parametric trajectory inside the hemisphere.
struct Trajectory {
    double rho_x = 2, rho_y = 2, z0 = 3, az = 1;
    double w1 = 0.3, w2 = 0.25, w3 = 0.2;
    double p1 = 0, p2 = 0, p3 = 0;
    std::array<double, 3> at(double t) const {
        return {rho_x * std::sin(w1 * t + p1), rho_y * std::sin(w2 * t + p2),
                z0 + az * std::sin(w3 * t + p3)};
    }
};
Trajectory make_trajectory(const SimConfig& cfg, std::mt19937_64& rng);

// Class-specific harmonic comb delayed per mic by distance/c (evaluated at the
// exact fractional delay), scaled by 1/distance and the capsule directivity,
// plus white noise at the configured SNR.
audio::AudioWindow synth_audio(const std::array<double, 3>& pos, const ClassSpec& cls,
                               const std::vector<Microphone>& mics, const SimConfig& cfg,
                               std::mt19937_64& rng);

// Pinhole projection of the target as a class-tinted Gaussian blob over a
// low-frequency background texture; every pixel is scaled by `brightness`.
vision::ImageFrame synth_image(const std::array<double, 3>& pos, const ClassSpec& cls,
                               const CameraModel& cam, double brightness,
                               std::mt19937_64& rng);

// Points on a class-sized box around the target plus uniform clutter.
labeler::PointCloud synth_lidar(const std::array<double, 3>& pos, const ClassSpec& cls,
                                const SimConfig& cfg, double timestamp, std::mt19937_64& rng);

FrameSample synth_frame(const SimConfig& cfg, const Trajectory& traj, int class_id,
                        int scene_index, int frame_index, uint64_t seed);

struct DatasetSummary {
    int scenes = 0;
    int frames = 0;
    int train_frames = 0;
    int test_frames = 0;
};

// Writes per-frame sensor arrays and a manifest.json; deterministic for a
// fixed (config, seed). Scenes are split train/test by index at
// round(train_fraction * scenes).
DatasetSummary generate_dataset(const SimConfig& cfg, uint64_t seed, const std::string& out_dir);

}  // namespace avtrack::sim
