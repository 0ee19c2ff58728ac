#pragma once

#include <string>
#include <vector>

#include "avtrack/sim.hpp"

namespace avtrack::data {

struct FrameRef {
    int scene = 0;
    int frame = 0;
    std::string split;  // "train" | "test"
    double timestamp = 0.0;
    std::string audio_path, image_path, cloud_path;  // relative to root
    sim::Truth truth;
};

// Read-only view over a generated dataset directory.
struct Dataset {
    std::string root;
    uint64_t seed = 0;
    sim::SimConfig sim_cfg;
    int num_scenes = 0;
    std::vector<int> scene_class;
    std::vector<FrameRef> frames;

    static Dataset load(const std::string& dir);

    audio::AudioWindow load_audio(const FrameRef& ref) const;
    vision::ImageFrame load_image(const FrameRef& ref) const;
    labeler::PointCloud load_cloud(const FrameRef& ref) const;

    std::vector<const FrameRef*> split(const std::string& tag) const;
};

}  // namespace avtrack::data
