#include "avtrack/pseudo_label.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "avtrack/errors.hpp"

namespace avtrack::labeler {

namespace {

double dist2(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return dx * dx + dy * dy + dz * dz;
}

Cluster finalize_cluster(const PointCloud& cloud, std::vector<int> members) {
    std::sort(members.begin(), members.end());
    Cluster c;
    c.point_count = static_cast<int>(members.size());
    std::array<double, 3> lo{std::numeric_limits<double>::max(),
                             std::numeric_limits<double>::max(),
                             std::numeric_limits<double>::max()};
    std::array<double, 3> hi{std::numeric_limits<double>::lowest(),
                             std::numeric_limits<double>::lowest(),
                             std::numeric_limits<double>::lowest()};
    for (int idx : members) {
        const auto& p = cloud.points[idx];
        for (int k = 0; k < 3; ++k) {
            c.centroid[k] += p[k];
            lo[k] = std::min(lo[k], p[k]);
            hi[k] = std::max(hi[k], p[k]);
        }
    }
    for (int k = 0; k < 3; ++k) {
        c.centroid[k] /= c.point_count;
        c.extent[k] = hi[k] - lo[k];
    }
    c.members = std::move(members);
    return c;
}

}  // namespace

std::vector<Cluster> dbscan(const PointCloud& cloud, double eps, int min_pts) {
    if (!(eps > 0.0)) throw InputError("dbscan: eps must be positive");
    if (min_pts < 1) throw InputError("dbscan: min_pts must be >= 1");
    const int n = static_cast<int>(cloud.points.size());
    if (n == 0) return {};

    const double eps2 = eps * eps;
    std::vector<std::vector<int>> nbrs(n);
    for (int i = 0; i < n; ++i) {
        nbrs[i].push_back(i);
        for (int j = i + 1; j < n; ++j) {
            if (dist2(cloud.points[i], cloud.points[j]) <= eps2) {
                nbrs[i].push_back(j);
                nbrs[j].push_back(i);
            }
        }
    }
    std::vector<char> core(n, 0);
    for (int i = 0; i < n; ++i) core[i] = static_cast<int>(nbrs[i].size()) >= min_pts;

    // Expand clusters over the core-core adjacency.
    std::vector<int> label(n, -1);
    int next = 0;
    for (int i = 0; i < n; ++i) {
        if (!core[i] || label[i] != -1) continue;
        std::vector<int> queue{i};
        label[i] = next;
        while (!queue.empty()) {
            const int cur = queue.back();
            queue.pop_back();
            for (int nb : nbrs[cur]) {
                if (core[nb] && label[nb] == -1) {
                    label[nb] = next;
                    queue.push_back(nb);
                }
            }
        }
        ++next;
    }
    // Border points attach to their nearest core neighbor.
    for (int i = 0; i < n; ++i) {
        if (core[i]) continue;
        int best = -1;
        double best_d = std::numeric_limits<double>::max();
        for (int nb : nbrs[i]) {
            if (!core[nb]) continue;
            const double d = dist2(cloud.points[i], cloud.points[nb]);
            if (d < best_d || (d == best_d && (best == -1 || nb < best))) {
                best_d = d;
                best = nb;
            }
        }
        if (best >= 0) label[i] = label[best];
    }

    std::vector<std::vector<int>> groups(next);
    for (int i = 0; i < n; ++i)
        if (label[i] >= 0) groups[label[i]].push_back(i);

    std::vector<Cluster> out;
    out.reserve(groups.size());
    for (auto& g : groups)
        if (!g.empty()) out.push_back(finalize_cluster(cloud, std::move(g)));
    std::sort(out.begin(), out.end(),
              [](const Cluster& a, const Cluster& b) { return a.members[0] < b.members[0]; });
    return out;
}

const char* reject_reason_name(RejectReason r) {
    switch (r) {
        case RejectReason::too_few_points: return "too_few_points";
        case RejectReason::too_many_points: return "too_many_points";
        case RejectReason::too_large: return "too_large";
        case RejectReason::no_continuity: return "no_continuity";
    }
    return "unknown";
}

FilterResult filter_clusters(const std::vector<FrameClusters>& frames, const FilterRules& rules) {
    FilterResult res;

    // Pass 1: per-cluster size and shape gates.
    struct Candidate {
        int frame_pos;  // index into `frames`
        int cluster_idx;
    };
    std::vector<std::vector<int>> eligible(frames.size());
    for (size_t f = 0; f < frames.size(); ++f) {
        for (size_t c = 0; c < frames[f].clusters.size(); ++c) {
            const Cluster& cl = frames[f].clusters[c];
            if (cl.point_count < rules.c_min) {
                res.rejected.push_back({frames[f].frame_index, static_cast<int>(c),
                                        RejectReason::too_few_points});
            } else if (cl.point_count > rules.c_max) {
                res.rejected.push_back({frames[f].frame_index, static_cast<int>(c),
                                        RejectReason::too_many_points});
            } else if (cl.extent[0] > rules.e_max || cl.extent[1] > rules.e_max ||
                       cl.extent[2] > rules.e_max) {
                res.rejected.push_back(
                    {frames[f].frame_index, static_cast<int>(c), RejectReason::too_large});
            } else {
                eligible[f].push_back(static_cast<int>(c));
            }
        }
    }

    // Pass 2: frame-to-frame greedy nearest association.
    struct Track {
        std::vector<std::pair<int, int>> hits;  // (frame_pos, cluster_idx)
        bool open = true;
    };
    std::vector<Track> tracks;
    std::vector<int> active;  // indices into tracks with a hit in the previous frame

    for (size_t f = 0; f < frames.size(); ++f) {
        std::vector<int> next_active;
        std::vector<char> taken_cluster(eligible[f].size(), 0);
        std::vector<char> taken_track(active.size(), 0);
        const bool consecutive =
            f > 0 && frames[f].frame_index == frames[f - 1].frame_index + 1;
        if (consecutive && !active.empty() && !eligible[f].empty()) {
            struct Pair {
                double d;
                int ti, ci;
            };
            std::vector<Pair> pairs;
            for (size_t ti = 0; ti < active.size(); ++ti) {
                const auto& last = tracks[active[ti]].hits.back();
                const auto& lastc = frames[last.first].clusters[last.second].centroid;
                for (size_t ci = 0; ci < eligible[f].size(); ++ci) {
                    const auto& cc = frames[f].clusters[eligible[f][ci]].centroid;
                    const double d = std::sqrt(dist2(lastc, cc));
                    if (d <= rules.d_max)
                        pairs.push_back({d, static_cast<int>(ti), static_cast<int>(ci)});
                }
            }
            std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
                if (a.d != b.d) return a.d < b.d;
                if (a.ti != b.ti) return a.ti < b.ti;
                return a.ci < b.ci;
            });
            for (const auto& p : pairs) {
                if (taken_track[p.ti] || taken_cluster[p.ci]) continue;
                taken_track[p.ti] = taken_cluster[p.ci] = 1;
                tracks[active[p.ti]].hits.push_back(
                    {static_cast<int>(f), eligible[f][p.ci]});
                next_active.push_back(active[p.ti]);
            }
        }
        // Unmatched previous tracks close; unmatched clusters seed new tracks.
        for (size_t ti = 0; ti < active.size(); ++ti)
            if (!taken_track[ti]) tracks[active[ti]].open = false;
        for (size_t ci = 0; ci < eligible[f].size(); ++ci) {
            if (taken_cluster[ci]) continue;
            Track t;
            t.hits.push_back({static_cast<int>(f), eligible[f][ci]});
            tracks.push_back(std::move(t));
            next_active.push_back(static_cast<int>(tracks.size()) - 1);
        }
        active = std::move(next_active);
    }

    // Pass 3: keep tracks spanning >= m_min frames; the rest are continuity rejections.
    std::vector<std::vector<int>> kept_per_frame(frames.size());
    int track_id = 0;
    for (const auto& t : tracks) {
        if (static_cast<int>(t.hits.size()) < rules.m_min) {
            for (const auto& [fp, ci] : t.hits)
                res.rejected.push_back(
                    {frames[fp].frame_index, ci, RejectReason::no_continuity});
            continue;
        }
        PseudoTrack pt;
        pt.id = track_id++;
        for (const auto& [fp, ci] : t.hits) {
            pt.frame_indices.push_back(frames[fp].frame_index);
            pt.timestamps.push_back(frames[fp].timestamp);
            pt.centroids.push_back(frames[fp].clusters[ci].centroid);
            kept_per_frame[fp].push_back(ci);
        }
        res.tracks.push_back(std::move(pt));
    }

    for (size_t f = 0; f < frames.size(); ++f) {
        FrameClusters fc;
        fc.frame_index = frames[f].frame_index;
        fc.timestamp = frames[f].timestamp;
        std::sort(kept_per_frame[f].begin(), kept_per_frame[f].end());
        for (int ci : kept_per_frame[f]) fc.clusters.push_back(frames[f].clusters[ci]);
        res.kept.push_back(std::move(fc));
    }
    return res;
}

std::vector<TrajectoryLabel> emit_labels(const std::vector<PseudoTrack>& tracks) {
    std::vector<TrajectoryLabel> out;
    for (const auto& t : tracks) {
        for (size_t i = 0; i < t.timestamps.size(); ++i) {
            if (i > 0 && !(t.timestamps[i] > t.timestamps[i - 1]))
                throw InputError("emit_labels: timestamps must strictly increase within a track");
            out.push_back({t.timestamps[i], t.id, t.frame_indices[i], t.centroids[i]});
        }
    }
    return out;
}

void write_labels(const std::string& path, const std::vector<TrajectoryLabel>& labels) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write labels file: " + path);
    f << "# timestamp track_id frame x y z\n";
    f.precision(17);
    for (const auto& l : labels)
        f << l.timestamp << ' ' << l.track_id << ' ' << l.frame_index << ' ' << l.position[0]
          << ' ' << l.position[1] << ' ' << l.position[2] << '\n';
}

std::vector<TrajectoryLabel> read_labels(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read labels file: " + path);
    std::vector<TrajectoryLabel> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        TrajectoryLabel l;
        if (!(ss >> l.timestamp >> l.track_id >> l.frame_index >> l.position[0] >>
              l.position[1] >> l.position[2]))
            throw IoError("malformed labels line: " + line);
        out.push_back(l);
    }
    return out;
}

}  // namespace avtrack::labeler
