#pragma once

#include <array>
#include <string>
#include <vector>

namespace avtrack::labeler {

struct PointCloud {
    std::vector<std::array<double, 3>> points;  // meters
    double timestamp = 0.0;
};

struct Cluster {
    std::vector<int> members;          // indices into the source cloud
    std::array<double, 3> centroid{};  // meters
    std::array<double, 3> extent{};    // axis-aligned bounding box size
    int point_count = 0;
};

// Density-based clustering. A point is core when its eps-ball (including the
// point itself) holds at least min_pts points; core points within eps of each
// other share a cluster and border points attach to their nearest core point
// (ties broken by lowest core index). The result is therefore independent of
// input order up to relabeling; clusters are canonically ordered by their
// smallest member index.
std::vector<Cluster> dbscan(const PointCloud& cloud, double eps, int min_pts);

struct FilterRules {
    int c_min = 3;        // minimum points per cluster
    int c_max = 400;      // maximum points per cluster
    double e_max = 1.5;   // maximum bounding-box extent per axis (m)
    double d_max = 2.0;   // maximum per-frame centroid displacement (m)
    int m_min = 3;        // minimum consecutive frames for a track
};

enum class RejectReason { too_few_points, too_many_points, too_large, no_continuity };

struct Rejection {
    int frame = 0;
    int cluster = 0;
    RejectReason reason{};
};

const char* reject_reason_name(RejectReason r);

struct FrameClusters {
    int frame_index = 0;
    double timestamp = 0.0;
    std::vector<Cluster> clusters;
};

struct PseudoTrack {
    int id = 0;
    std::vector<int> frame_indices;  // strictly increasing, consecutive
    std::vector<double> timestamps;
    std::vector<std::array<double, 3>> centroids;
};

struct FilterResult {
    std::vector<FrameClusters> kept;  // subset of the input clusters per frame
    std::vector<Rejection> rejected;
    std::vector<PseudoTrack> tracks;
};

// Size/shape gating per cluster, then frame-to-frame greedy nearest-centroid
// association gated by d_max; only clusters on tracks spanning at least m_min
// consecutive frames survive.
FilterResult filter_clusters(const std::vector<FrameClusters>& frames, const FilterRules& rules);

struct TrajectoryLabel {
    double timestamp = 0.0;
    int track_id = 0;
    int frame_index = 0;
    std::array<double, 3> position{};
};

// One label per frame per retained track, timestamps strictly increasing
// within a track. No class is assigned here.
std::vector<TrajectoryLabel> emit_labels(const std::vector<PseudoTrack>& tracks);

void write_labels(const std::string& path, const std::vector<TrajectoryLabel>& labels);
std::vector<TrajectoryLabel> read_labels(const std::string& path);

}  // namespace avtrack::labeler
